"""Dense two-phase tableau simplex.

Solves   max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

Small and deterministic: Dantzig pricing with a switch to Bland's rule
after a fixed iteration budget so degenerate instances cannot cycle.
Intended for the modest LPs of the patrol MILP (hundreds of rows); no
sparsity, no factorization updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float


def _pivot(tab: np.ndarray, row: int, col: int, basis: np.ndarray) -> None:
    tab[row] /= tab[row, col]
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    tab -= np.outer(colvals, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0
    basis[row] = col


def _run_simplex(tab, basis, ncols, tol, max_iter, allowed):
    """Drive the reduced-cost row (last) to nonnegativity. Returns status."""
    m = tab.shape[0] - 1
    bland_after = max(200, 5 * (m + ncols))
    for it in range(max_iter):
        costs = tab[-1, :ncols]
        if it < bland_after:
            col = int(np.argmin(np.where(allowed[:ncols], costs, np.inf)))
            if costs[col] >= -tol:
                return OPTIMAL
        else:  # Bland: lowest-index improving column, guarantees termination
            negs = np.flatnonzero(allowed[:ncols] & (costs < -tol))
            if negs.size == 0:
                return OPTIMAL
            col = int(negs[0])
        ratios = np.full(m, np.inf)
        pos = tab[:m, col] > tol
        ratios[pos] = tab[:m, -1][pos] / tab[:m, col][pos]
        row = int(np.argmin(ratios))
        if not np.isfinite(ratios[row]):
            return UNBOUNDED
        # deterministic tie-break: smallest basis label among minimal ratios
        ties = np.flatnonzero(np.abs(ratios - ratios[row]) <= tol * (1 + abs(ratios[row])))
        if ties.size > 1:
            row = int(ties[np.argmin(basis[ties])])
        _pivot(tab, row, col, basis)
    return ITERATION_LIMIT


def solve_lp(
    c: np.ndarray,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    tol: float = 1e-9,
    max_iter: int = 50000,
) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    rows = []
    rhs = []
    senses = []
    if A_ub is not None and len(A_ub):
        for a, b in zip(np.atleast_2d(A_ub), np.atleast_1d(b_ub)):
            rows.append(np.asarray(a, dtype=float))
            rhs.append(float(b))
            senses.append("<")
    if A_eq is not None and len(A_eq):
        for a, b in zip(np.atleast_2d(A_eq), np.atleast_1d(b_eq)):
            rows.append(np.asarray(a, dtype=float))
            rhs.append(float(b))
            senses.append("=")
    m = len(rows)
    if m == 0:
        # with x >= 0 and no rows, optimum is 0 unless some cost is positive
        if np.any(c > tol):
            return LpResult(UNBOUNDED, None, np.inf)
        return LpResult(OPTIMAL, np.zeros(n), 0.0)

    A = np.vstack(rows)
    b = np.asarray(rhs, dtype=float)
    senses = np.asarray(senses)
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    senses[flip] = np.where(senses[flip] == "<", ">", np.where(senses[flip] == ">", "<", "="))

    n_slack = int(np.sum(senses != "="))
    n_art = int(np.sum(senses != "<"))
    ncols = n + n_slack + n_art
    tab = np.zeros((m + 1, ncols + 1))
    tab[:m, :n] = A
    tab[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    s_at, a_at = n, n + n_slack
    art_cols = []
    for i, sense in enumerate(senses):
        if sense == "<":
            tab[i, s_at] = 1.0
            basis[i] = s_at
            s_at += 1
        elif sense == ">":
            tab[i, s_at] = -1.0
            s_at += 1
            tab[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1
        else:
            tab[i, a_at] = 1.0
            basis[i] = a_at
            art_cols.append(a_at)
            a_at += 1

    allowed = np.ones(ncols, dtype=bool)
    if art_cols:
        # Phase 1: minimize the artificial sum.
        tab[-1, :] = 0.0
        tab[-1, art_cols] = 1.0
        for i in range(m):
            if basis[i] in art_cols:
                tab[-1] -= tab[i]
        status = _run_simplex(tab, basis, ncols, tol, max_iter, allowed)
        if status != OPTIMAL or tab[-1, -1] < -1e-7:
            return LpResult(INFEASIBLE if status == OPTIMAL else status, None, -np.inf)
        # Drive leftover artificials out of the basis; a row where that is
        # impossible is redundant and gets dropped.
        art_set = set(art_cols)
        drop = []
        for i in range(m):
            if basis[i] in art_set:
                cand = np.flatnonzero(np.abs(tab[i, :n + n_slack]) > tol)
                if cand.size:
                    _pivot(tab, i, int(cand[0]), basis)
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            tab = tab[keep + [m]]
            basis = basis[keep]
            m = len(keep)
        allowed[art_cols] = False

    # Phase 2: maximize c.x == minimize (-c).x
    tab[-1, :] = 0.0
    tab[-1, :n] = -c
    for i in range(m):
        if basis[i] < n and abs(tab[-1, basis[i]]) > 0:
            tab[-1] -= tab[-1, basis[i]] * tab[i]
    status = _run_simplex(tab, basis, ncols, tol, max_iter, allowed)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, None, np.inf)
    if status != OPTIMAL:
        return LpResult(status, None, -np.inf)
    x = np.zeros(ncols)
    x[basis] = tab[:m, -1]
    return LpResult(OPTIMAL, x[:n], float(c @ x[:n]))

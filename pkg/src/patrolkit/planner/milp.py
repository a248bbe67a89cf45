"""Robust patrol MILP: flow polytope + piecewise-linear utilities.

Decision variables are edge flows on the time-unrolled graph (continuous,
a mixed strategy), per-cell convex-combination weights over the utility
breakpoints, and binary segment selectors that force each cell's weights
onto two adjacent breakpoints (the SOS2 condition). The per-cell utility
U(c) = g(c) - beta * g(c) * nu(c) is formed pointwise at the breakpoints
before linearization, so the objective stays linear.

Branch and bound works on per-cell breakpoint windows (SOS2 interval
branching): fixing a window to a contiguous breakpoint range is the same
as zeroing the selectors outside it, but splitting a window halves the
search space where branching a single selector barely tightens it. Inside
a width-one window the weights are forced onto two adjacent breakpoints,
so integrality never needs a separate check. The node relaxations drop
the selector columns entirely and are solved by the dense simplex; every
relaxation's flow is itself a feasible plan, which supplies incumbents. A
tiny deterministic perturbation (1e-9 times the edge index) breaks ties
among optimal flows so repeated solves return the same plan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..riskmap import PwlRiskModel
from .graph import PlanInfeasibleError, PlannerError, TimeUnrolledGraph
from .simplex import INFEASIBLE, OPTIMAL, solve_lp


@dataclass(frozen=True)
class PlanProblem:
    graph: TimeUnrolledGraph
    pwl: PwlRiskModel
    K: int = 1
    beta: float = 0.0
    mip_gap: float = 1e-6
    feas_tol: float = 1e-9
    perturbation: float = 1e-9

    def __post_init__(self):
        if self.K < 1:
            raise PlannerError("K must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise PlannerError("beta must lie in [0, 1]")


@dataclass
class MilpModel:
    """LP data for one plan problem.

    The core system (flows + breakpoint weights) is what the internal
    branch and bound solves; the full system additionally carries the
    binary selector columns and their linking rows for the LP-file export
    and for external solvers.
    """

    problem: PlanProblem
    pwl: PwlRiskModel               # domain-extended copy
    cells: list[int]                # cells with PWL terms (appear in graph)
    util: np.ndarray                # (n_cells_total, m+1) breakpoint utilities
    obj_const: float                # utility of cells stuck at zero coverage
    n_flow: int
    n_bp: int
    # core system: columns [flows | lambdas], rows eq-only
    core_obj: np.ndarray
    core_A_eq: np.ndarray
    core_b_eq: np.ndarray
    # full system with binary selectors, for export and external solvers
    obj: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    z_cols: np.ndarray
    var_names: list[str] = field(repr=False, default_factory=list)
    lam_of: dict = field(repr=False, default_factory=dict)
    z_of: dict = field(repr=False, default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.obj.shape[0]

    @property
    def n_core(self) -> int:
        return self.core_obj.shape[0]

    def lam_slice(self, cell_pos: int) -> slice:
        start = self.n_flow + cell_pos * self.n_bp
        return slice(start, start + self.n_bp)

    def flow_values(self, x: np.ndarray) -> np.ndarray:
        return x[: self.n_flow]

    def true_objective(self, x: np.ndarray) -> float:
        """Unperturbed objective at a solution vector."""
        g = self.problem.graph
        cov = g.coverage_from_flow(self.flow_values(x), self.problem.K)
        return objective_of_coverage(self.pwl, g.grid, cov, self.problem.beta)

    def flow_incumbent_value(self, x: np.ndarray) -> float:
        """LP-comparable objective of the flow part of a solution.

        Any feasible flow is MILP-feasible: its coverage can always be
        written as a convex combination of two adjacent breakpoints. The
        value is the interpolated utility over graph cells plus the flow
        perturbation, matching the LP objective (which omits obj_const).
        """
        flow = self.flow_values(x)
        g = self.problem.graph
        cov = g.coverage_from_flow(flow, self.problem.K)
        total = float(self.core_obj[: self.n_flow] @ flow)
        for cid in self.cells:
            total += float(np.interp(cov[cid], self.pwl.breakpoints, self.util[cid]))
        return total


def utility_at(pwl: PwlRiskModel, cell: int, effort, beta: float):
    u = pwl.utility_values(beta)[cell]
    return np.interp(effort, pwl.breakpoints, u)


def objective_of_coverage(pwl: PwlRiskModel, grid, coverage: np.ndarray, beta: float) -> float:
    """Sum of per-cell PWL utilities over all park cells."""
    util = pwl.utility_values(beta)
    total = 0.0
    for cid in grid.masked_ids():
        total += float(np.interp(coverage[cid], pwl.breakpoints, util[cid]))
    return total


def assemble_milp(problem: PlanProblem) -> MilpModel:
    """Build the MILP for one problem instance.

    The PWL domain is flat-extended (with a warning) if the achievable
    coverage T*K exceeds it. Cells pruned from the graph contribute their
    zero-coverage utility as an objective constant.
    """
    g = problem.graph
    pwl = problem.pwl.extended_to(problem.graph.horizon * problem.K)
    cells = g.cells()
    util = pwl.utility_values(problem.beta)
    br = pwl.breakpoints
    n_bp = br.size
    n_seg = n_bp - 1
    n_flow = g.num_edges
    n_lam = len(cells) * n_bp
    n_core = n_flow + n_lam

    names = [f"f_{g.nodes[u][1]}_{g.nodes[u][0]}_{g.nodes[v][0]}" for u, v in g.edges]
    lam_of = {}
    for pos, cid in enumerate(cells):
        for j in range(n_bp):
            lam_of[(cid, j)] = n_flow + pos * n_bp + j
            names.append(f"lam_{cid}_{j}")
    z_of = {}
    for pos, cid in enumerate(cells):
        for s in range(1, n_seg + 1):
            z_of[(cid, s)] = n_core + pos * n_seg + (s - 1)
            names.append(f"z_{cid}_{s}")
    n_vars = n_core + len(cells) * n_seg

    core_obj = np.zeros(n_core)
    for e in range(n_flow):
        core_obj[e] = -problem.perturbation * e
    for pos, cid in enumerate(cells):
        core_obj[n_flow + pos * n_bp: n_flow + (pos + 1) * n_bp] = util[cid]

    obj_const = 0.0
    in_graph = set(cells)
    for cid in g.grid.masked_ids():
        if int(cid) not in in_graph:
            obj_const += float(util[cid, 0])

    eq_rows, eq_rhs = [], []
    if g.horizon > 1:
        for i in range(g.num_nodes):
            row = np.zeros(n_core)
            if i == g.source:
                for e in g.out_edges(i):
                    row[e] = 1.0
                rhs = 1.0
            elif i == g.sink:
                for e in g.in_edges(i):
                    row[e] = 1.0
                rhs = 1.0
            else:
                for e in g.in_edges(i):
                    row[e] = 1.0
                for e in g.out_edges(i):
                    row[e] -= 1.0
                rhs = 0.0
            eq_rows.append(row)
            eq_rhs.append(rhs)

    K = float(problem.K)
    inflow_edges: dict[int, list[int]] = {cid: [] for cid in cells}
    for e, (_, v) in enumerate(g.edges):
        inflow_edges[g.nodes[v][0]].append(e)
    for pos, cid in enumerate(cells):
        row = np.zeros(n_core)
        row[n_flow + pos * n_bp: n_flow + (pos + 1) * n_bp] = br
        for e in inflow_edges[cid]:
            row[e] -= K
        eq_rows.append(row)
        eq_rhs.append(K if cid == g.post else 0.0)
    for pos in range(len(cells)):
        row = np.zeros(n_core)
        row[n_flow + pos * n_bp: n_flow + (pos + 1) * n_bp] = 1.0
        eq_rows.append(row)
        eq_rhs.append(1.0)
    core_A_eq = np.asarray(eq_rows) if eq_rows else np.zeros((0, n_core))
    core_b_eq = np.asarray(eq_rhs)

    # full system: core rows padded with zero selector columns, plus the
    # selector conventions (sum to one; weights only next to a chosen segment)
    obj = np.concatenate([core_obj, np.zeros(n_vars - n_core)])
    full_eq = [np.concatenate([r, np.zeros(n_vars - n_core)]) for r in eq_rows]
    full_rhs = list(eq_rhs)
    for pos, cid in enumerate(cells):
        row = np.zeros(n_vars)
        for s in range(1, n_seg + 1):
            row[z_of[(cid, s)]] = 1.0
        full_eq.append(row)
        full_rhs.append(1.0)
    ub_rows, ub_rhs = [], []
    for pos, cid in enumerate(cells):
        for j in range(n_bp):
            row = np.zeros(n_vars)
            row[lam_of[(cid, j)]] = 1.0
            if j >= 1:
                row[z_of[(cid, j)]] = -1.0
            if j + 1 <= n_seg:
                row[z_of[(cid, j + 1)]] = -1.0
            ub_rows.append(row)
            ub_rhs.append(0.0)

    return MilpModel(
        problem=problem, pwl=pwl, cells=cells, util=util, obj_const=obj_const,
        n_flow=n_flow, n_bp=n_bp,
        core_obj=core_obj, core_A_eq=core_A_eq, core_b_eq=core_b_eq,
        obj=obj, A_eq=np.asarray(full_eq), b_eq=np.asarray(full_rhs),
        A_ub=np.asarray(ub_rows) if ub_rows else np.zeros((0, n_vars)),
        b_ub=np.asarray(ub_rhs),
        z_cols=np.asarray(sorted(z_of.values()), dtype=np.int64),
        var_names=names, lam_of=lam_of, z_of=z_of,
    )


def _solve_window_lp(model: MilpModel, windows: np.ndarray):
    """LP relaxation with each cell's weights confined to its breakpoint
    window. Returns (status, x_core, objective)."""
    keep = np.ones(model.n_core, dtype=bool)
    for pos in range(len(model.cells)):
        lo, hi = windows[pos]
        sl = model.lam_slice(pos)
        col = np.zeros(model.n_bp, dtype=bool)
        col[lo:hi + 1] = True
        keep[sl] = col
    cols = np.flatnonzero(keep)
    res = solve_lp(model.core_obj[cols], None, None,
                   model.core_A_eq[:, cols], model.core_b_eq)
    if res.status != OPTIMAL:
        return res.status, None, -np.inf
    x = np.zeros(model.n_core)
    x[cols] = res.x
    return OPTIMAL, x, res.objective


def branch_and_bound(model: MilpModel, node_limit: int = 100000):
    """Maximize over SOS2-feasible weight assignments.

    Returns (x_core, perturbed_objective). Depth-first over breakpoint
    windows; each relaxation's flow doubles as a primal incumbent, and a
    node is closed once its relaxation value is within the MIP gap of the
    interpolated utility of its own flow.
    """
    gap = model.problem.mip_gap
    n_cells = len(model.cells)
    m = model.n_bp - 1
    br = model.pwl.breakpoints
    best_x, best_obj = None, -np.inf
    root = np.tile(np.array([0, m]), (n_cells, 1))
    stack = [root]
    nodes = 0

    while stack:
        windows = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise PlannerError("branch-and-bound node limit exceeded")
        status, x, ub = _solve_window_lp(model, windows)
        if status != OPTIMAL:
            if status == INFEASIBLE:
                continue
            raise PlannerError(f"LP relaxation failed: {status}")
        if ub <= best_obj + gap:
            continue
        heur = model.flow_incumbent_value(x)
        if heur > best_obj:
            best_obj, best_x = heur, x
            if ub <= best_obj + gap:
                continue

        # branch on the cell whose weights cheat the envelope the most
        best_gap, branch_pos = 0.0, -1
        for pos, cid in enumerate(model.cells):
            lam = x[model.lam_slice(pos)]
            cv = float(lam @ br)
            lam_obj = float(lam @ model.util[cid])
            violation = lam_obj - float(np.interp(cv, br, model.util[cid]))
            if violation > best_gap + 1e-12:
                best_gap, branch_pos = violation, pos
        if branch_pos < 0:
            # relaxation matches its own interpolation: node solved exactly
            continue
        lo, hi = windows[branch_pos]
        lam = x[model.lam_slice(branch_pos)]
        mass = lam[lo:hi + 1]
        cum = np.cumsum(mass)
        r = lo + int(np.searchsorted(cum, 0.5 * cum[-1]))
        r = min(max(r, lo + 1), hi - 1)
        left = windows.copy()
        left[branch_pos] = (lo, r)
        right = windows.copy()
        right[branch_pos] = (r, hi)
        stack.append(left)
        stack.append(right)

    if best_x is None:
        raise PlanInfeasibleError("no feasible patrol plan")
    return best_x, best_obj

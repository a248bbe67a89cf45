"""Risk maps, piecewise-linear effort-response models, and block selection.

The trained ensemble gives every cell a detection probability and an
uncertainty as functions of hypothetical patrol effort. Sweeping a grid of
effort levels produces risk/uncertainty maps; sampling the functions at
uniform breakpoints produces the piecewise-linear approximations the patrol
optimizer consumes. Block selection reproduces the field-test protocol:
convolve the risk map into blocks, drop historically well-patrolled blocks,
and draw candidate blocks from high/medium/low risk percentile bands.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import ParkGrid, PatrolDataset
from .iware import IWareEnsemble, IwareError


@dataclass(frozen=True)
class RiskMap:
    """Per-cell prediction and squashed uncertainty at each effort level.

    Cells outside the park mask carry NaN.
    """

    grid: ParkGrid
    effort_levels: tuple[float, ...]
    prob: np.ndarray  # (levels, n_cells)
    var: np.ndarray   # (levels, n_cells), squashed to [0, 1)

    def __post_init__(self):
        lv = tuple(float(c) for c in self.effort_levels)
        if not lv or any(b <= a for a, b in zip(lv, lv[1:])):
            raise IwareError("effort levels must be nonempty and strictly increasing")
        object.__setattr__(self, "effort_levels", lv)
        for name in ("prob", "var"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (len(lv), self.grid.n_cells):
                raise IwareError(f"{name} must be (levels, n_cells)")
            object.__setattr__(self, name, arr)


def _query_features(grid: ParkGrid, ds: PatrolDataset) -> np.ndarray:
    """Feature matrix for prediction period queries: static features plus
    the last observed effort as the previous-coverage covariate."""
    prev = ds.effort[ds.num_timesteps - 1]
    return np.concatenate([grid.features, prev[:, None]], axis=1)


def sweep_riskmap(
    ens: IWareEnsemble,
    grid: ParkGrid,
    ds: PatrolDataset,
    effort_levels,
) -> RiskMap:
    """Evaluate the ensemble at each hypothetical effort level."""
    levels = [float(c) for c in effort_levels]
    ids = grid.masked_ids()
    X = _query_features(grid, ds)[ids]
    P, V = ens.member_outputs(X)
    prob = np.full((len(levels), grid.n_cells), np.nan)
    var = np.full((len(levels), grid.n_cells), np.nan)
    for j, c in enumerate(levels):
        g, v_raw = ens.combine_at_effort(P, V, c)
        prob[j, ids] = g
        var[j, ids] = ens.squash(v_raw)
    return RiskMap(grid=grid, effort_levels=tuple(levels), prob=prob, var=var)


@dataclass(frozen=True)
class PwlRiskModel:
    """Shared-breakpoint piecewise-linear risk and uncertainty per cell.

    Values are exact at breakpoints, linearly interpolated between them,
    and clamped to the last value beyond the final breakpoint.
    """

    grid: ParkGrid
    breakpoints: np.ndarray   # (m+1,), starting at 0, strictly increasing
    prob_values: np.ndarray   # (n_cells, m+1); NaN outside mask
    var_values: np.ndarray    # (n_cells, m+1)

    def __post_init__(self):
        br = np.asarray(self.breakpoints, dtype=float)
        if br.ndim != 1 or br.size < 2 or br[0] != 0.0 or np.any(np.diff(br) <= 0):
            raise IwareError("breakpoints must start at 0 and strictly increase")
        object.__setattr__(self, "breakpoints", br)
        for name in ("prob_values", "var_values"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n_cells, br.size):
                raise IwareError(f"{name} must be (n_cells, m+1)")
            object.__setattr__(self, name, arr)

    @property
    def segments(self) -> int:
        return self.breakpoints.size - 1

    @property
    def c_max(self) -> float:
        return float(self.breakpoints[-1])

    def prob_at(self, cell: int, effort) -> np.ndarray | float:
        return np.interp(effort, self.breakpoints, self.prob_values[cell])

    def var_at(self, cell: int, effort) -> np.ndarray | float:
        return np.interp(effort, self.breakpoints, self.var_values[cell])

    def utility_values(self, beta: float) -> np.ndarray:
        """Breakpoint values of U = g - beta * g * nu, formed pointwise
        before linearization so the product stays piecewise linear."""
        return self.prob_values * (1.0 - beta * self.var_values)

    def extended_to(self, c_needed: float) -> "PwlRiskModel":
        """Flat-extend the final segment so the domain covers c_needed."""
        if c_needed <= self.c_max:
            return self
        warnings.warn(
            f"coverage range {c_needed:.3f} exceeds PWL domain {self.c_max:.3f}; clamping",
            stacklevel=2)
        br = np.concatenate([self.breakpoints, [float(c_needed)]])
        pv = np.concatenate([self.prob_values, self.prob_values[:, -1:]], axis=1)
        vv = np.concatenate([self.var_values, self.var_values[:, -1:]], axis=1)
        return PwlRiskModel(grid=self.grid, breakpoints=br, prob_values=pv, var_values=vv)


def default_c_max(ds: PatrolDataset) -> float:
    """Twice the 95th percentile of positive historical row efforts."""
    eff = ds.effort[:, ds.grid.masked_ids()].ravel()
    eff = eff[eff > 0]
    if eff.size == 0:
        return 1.0
    return float(2.0 * np.quantile(eff, 0.95))


def build_pwl(
    source: IWareEnsemble | RiskMap,
    grid: ParkGrid,
    m: int,
    c_max: float,
    ds: PatrolDataset | None = None,
) -> PwlRiskModel:
    """Sample the effort-response functions at m+1 uniform breakpoints.

    ``source`` is either a trained ensemble (needs ``ds`` for the
    previous-effort covariate) or an existing RiskMap to resample.
    """
    if m < 1:
        raise IwareError("need at least one segment")
    if c_max <= 0:
        raise IwareError("c_max must be positive")
    br = np.linspace(0.0, float(c_max), m + 1)
    n = grid.n_cells
    prob = np.full((n, m + 1), np.nan)
    var = np.full((n, m + 1), np.nan)
    ids = grid.masked_ids()
    if isinstance(source, RiskMap):
        levels = np.asarray(source.effort_levels)
        for cid in ids:
            prob[cid] = np.interp(br, levels, source.prob[:, cid])
            var[cid] = np.interp(br, levels, source.var[:, cid])
    else:
        if ds is None:
            raise IwareError("building a PWL model from an ensemble needs the dataset")
        X = _query_features(grid, ds)[ids]
        P, V = source.member_outputs(X)
        for j, c in enumerate(br):
            g, v_raw = source.combine_at_effort(P, V, float(c))
            prob[ids, j] = g
            var[ids, j] = source.squash(v_raw)
    return PwlRiskModel(grid=grid, breakpoints=br, prob_values=prob, var_values=var)


@dataclass(frozen=True)
class BlockSelection:
    """Field-test candidate blocks per risk band."""

    block_size_cells: int
    high: tuple[tuple[int, float], ...]    # (center cell, block risk)
    medium: tuple[tuple[int, float], ...]
    low: tuple[tuple[int, float], ...]
    percentile_bands: tuple = ((80, 100), (40, 60), (0, 20))
    effort_cutoff_percentile: float = 50.0
    truncated: bool = False  # fewer valid blocks than requested

    def to_dict(self) -> dict:
        return {
            "block_size_cells": self.block_size_cells,
            "percentile_bands": [list(b) for b in self.percentile_bands],
            "effort_cutoff_percentile": self.effort_cutoff_percentile,
            "truncated": self.truncated,
            "high": [[int(c), float(r)] for c, r in self.high],
            "medium": [[int(c), float(r)] for c, r in self.medium],
            "low": [[int(c), float(r)] for c, r in self.low],
        }


def _valid_blocks(grid: ParkGrid, values: np.ndarray, block: int):
    """Mean of ``values`` over every fully masked block; yields
    (block_index, center_cell, mean)."""
    W, H = grid.width, grid.height
    vals = values.reshape(H, W)
    mask = grid.mask.reshape(H, W).astype(float)
    out = []
    bi = 0
    for y0 in range(H - block + 1):
        for x0 in range(W - block + 1):
            sub_mask = mask[y0:y0 + block, x0:x0 + block]
            if sub_mask.sum() == block * block:
                centre = (y0 + block // 2) * W + (x0 + block // 2)
                out.append((bi, centre, float(vals[y0:y0 + block, x0:x0 + block].mean())))
            bi += 1
    return out


def select_field_test_blocks(
    grid: ParkGrid,
    risk: np.ndarray,
    historical_effort: np.ndarray,
    block_size: int = 3,
    per_band: int = 5,
    bands: tuple = ((80, 100), (40, 60), (0, 20)),
    effort_cutoff_percentile: float = 50.0,
) -> BlockSelection:
    """Candidate high/medium/low blocks for a ground field test.

    Risk is convolved into block means (fully interior, fully masked blocks
    only). Blocks with historical effort above the cutoff percentile are
    discarded; the rest are banded by risk percentile rank and the top
    ``per_band`` blocks per band (descending risk, ties by lowest block
    index) are returned.
    """
    if grid.width < block_size or grid.height < block_size:
        raise IwareError("grid smaller than the block size")
    risk_blocks = _valid_blocks(grid, np.asarray(risk, dtype=float), block_size)
    eff_blocks = _valid_blocks(grid, np.asarray(historical_effort, dtype=float), block_size)
    if not risk_blocks:
        raise IwareError("no fully masked blocks available")
    efforts = np.asarray([e for _, _, e in eff_blocks])
    cutoff = np.percentile(efforts, effort_cutoff_percentile)
    kept = [(bi, ctr, r) for (bi, ctr, r), (_, _, e) in zip(risk_blocks, eff_blocks) if e <= cutoff]

    nk = len(kept)
    order = sorted(range(nk), key=lambda i: (kept[i][2], kept[i][0]))
    pct = np.empty(nk)
    for rank, i in enumerate(order):
        pct[i] = 100.0 * rank / (nk - 1) if nk > 1 else 100.0

    truncated = False
    chosen: list[tuple[tuple[int, float], ...]] = []
    for lo, hi in bands:
        members = [i for i in range(nk) if lo <= pct[i] <= hi]
        members.sort(key=lambda i: (-kept[i][2], kept[i][0]))
        if len(members) < per_band:
            truncated = True
            warnings.warn(
                f"band {lo}-{hi} has only {len(members)} valid blocks "
                f"(requested {per_band})", stacklevel=2)
        chosen.append(tuple((kept[i][1], kept[i][2]) for i in members[:per_band]))

    return BlockSelection(block_size_cells=block_size, high=chosen[0],
                          medium=chosen[1], low=chosen[2], percentile_bands=bands,
                          effort_cutoff_percentile=effort_cutoff_percentile,
                          truncated=truncated)

"""Effort-aware ensemble over one-sided-noise patrol data.

Negative labels are only trustworthy where rangers actually patrolled, so
the ensemble trains one weak learner per effort threshold: learner i sees
every positive row but only the negatives recorded with effort strictly
above threshold i. Thresholds are percentiles of the positive-effort
distribution, keeping the training subsets comparably sized.

A single weight vector on the probability simplex is fit by minimizing
cross-validated log loss of the convex combination of learner outputs.
At prediction time the original qualification rule is kept: for a query
at hypothetical effort c only learners with threshold <= c participate,
with their weights renormalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import PatrolDataset
from .learners import (
    GpKernelConfig,
    TrainMatrix,
    deserialize_learner,
    serialize_learner,
    train_bagged,
    train_gp,
)

PROB_CLAMP = 1e-6

LEARNER_KINDS = ("trees", "gp")


class IwareError(ValueError):
    """Invalid ensemble configuration or unusable training data."""


@dataclass(frozen=True)
class ThresholdSet:
    """Ascending effort thresholds in km; the first is always 0."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th:
            raise IwareError("need at least one threshold")
        if th[0] != 0.0:
            raise IwareError("first threshold must be 0")
        if any(b < a for a, b in zip(th, th[1:])):
            raise IwareError("thresholds must be nondecreasing")
        object.__setattr__(self, "thresholds", th)

    @property
    def count(self) -> int:
        return len(self.thresholds)

    def qualified(self, effort: float) -> np.ndarray:
        """Boolean mask of learners whose threshold does not exceed effort."""
        return np.asarray([t <= effort for t in self.thresholds])


@dataclass(frozen=True)
class RiskQuery:
    """One cell's feature vector plus a hypothetical patrol effort."""

    features: np.ndarray          # (k+1,) static features + previous effort
    hypothetical_effort: float

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if f.ndim != 1 or not np.all(np.isfinite(f)):
            raise IwareError("query features must be a finite vector")
        if not np.isfinite(self.hypothetical_effort) or self.hypothetical_effort < 0:
            raise IwareError("hypothetical effort must be finite and >= 0")
        object.__setattr__(self, "features", f)


def _dataset_rows(ds: PatrolDataset):
    """Flatten (window, masked cell) rows: features, labels, effort, ids."""
    ids = ds.grid.masked_ids()
    T = ds.num_timesteps
    X = ds.design_matrix[:, ids, :].reshape(T * ids.size, -1)
    y = ds.labels[:, ids].ravel().astype(bool)
    eff = ds.effort[:, ids].ravel()
    row_ids = (np.arange(T)[:, None] * ds.grid.n_cells + ids[None, :]).ravel()
    return X, y, eff, row_ids


def select_thresholds(ds: PatrolDataset, I: int) -> ThresholdSet:
    """Effort-percentile thresholds: quantile (i-1)/I of the strictly
    positive efforts for i = 1..I, with the first forced to 0. Duplicate
    quantiles are collapsed (reducing I) with a warning."""
    if I < 1:
        raise IwareError("I must be >= 1")
    _, _, eff, _ = _dataset_rows(ds)
    pos_eff = eff[eff > 0]
    if pos_eff.size == 0:
        raise IwareError("dataset has no positive-effort rows")
    levels = [(i - 1) / I for i in range(1, I + 1)]
    raw = [0.0] + [float(np.quantile(pos_eff, q, method="linear")) for q in levels[1:]]
    collapsed = [raw[0]]
    for t in raw[1:]:
        if t > collapsed[-1]:
            collapsed.append(t)
    if len(collapsed) < len(raw):
        warnings.warn(
            f"collapsed {len(raw) - len(collapsed)} duplicate effort thresholds "
            f"(I reduced to {len(collapsed)})", stacklevel=2)
    return ThresholdSet(thresholds=tuple(collapsed))


def filter_dataset(ds: PatrolDataset, theta: float) -> TrainMatrix:
    """Training subset at one threshold: all positives, plus negatives whose
    effort exceeds theta."""
    if theta < 0:
        raise IwareError("threshold must be nonnegative")
    X, y, eff, row_ids = _dataset_rows(ds)
    keep = y | (eff > theta)
    if not keep.any():
        raise IwareError(f"no rows survive filtering at threshold {theta}")
    return TrainMatrix(rows=X[keep], labels=y[keep], row_ids=row_ids[keep])


def _clamp_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    p = np.where(np.isfinite(p), p, 0.5)
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def optimize_weights_from_probs(
    probs: np.ndarray,
    labels: np.ndarray,
    step: float = 0.5,
    max_iter: int = 500,
    tol: float = 1e-8,
) -> np.ndarray:
    """Simplex weights minimizing mean log loss of sum_i w_i p_i.

    Exponentiated-gradient descent from the uniform start; the objective is
    convex in w. Identical learner columns keep identical weights, which
    realizes the uniform tie-break.
    """
    P = _clamp_probs(probs)
    y = np.asarray(labels, dtype=float)
    n, I = P.shape
    if I == 1:
        return np.ones(1)
    logits = np.zeros(I)
    w = np.full(I, 1.0 / I)
    for _ in range(max_iter):
        mix = np.clip(P @ w, PROB_CLAMP, 1.0 - PROB_CLAMP)
        dmix = (mix - y) / (mix * (1.0 - mix))
        grad = P.T @ dmix / n
        logits -= step * grad
        logits -= logits.max()
        e = np.exp(logits)
        w_new = e / e.sum()
        if float(np.max(np.abs(w_new - w))) < tol:
            w = w_new
            break
        w = w_new
    return w


def log_loss(probs: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    P = _clamp_probs(probs)
    mix = np.clip(P @ np.asarray(weights, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(labels, dtype=float)
    return float(-np.mean(y * np.log(mix) + (1.0 - y) * np.log(1.0 - mix)))


def optimize_weights(learners: list, ds: PatrolDataset, folds: int = 5) -> np.ndarray:
    """Weights for already-trained learners scored on a dataset.

    Every learner must be able to score every row. (Out-of-fold retraining
    for unbiased weights happens inside train_iware; this operation is the
    plain optimizer over the given learners' predictions.)
    """
    del folds  # all rows are scored; equal-size fold means coincide
    X, y, _, _ = _dataset_rows(ds)
    P = np.column_stack([lrn.predict_proba(X)[0] for lrn in learners])
    return optimize_weights_from_probs(P, y)


@dataclass
class IWareEnsemble:
    """Trained threshold ensemble with optimized simplex weights."""

    thresholds: ThresholdSet
    learners: list
    weights: np.ndarray
    learner_kind: str
    squash_scale: float
    n_features: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.learners) != self.thresholds.count or w.shape != (self.thresholds.count,):
            raise IwareError("learners, thresholds and weights must align")
        if np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-9:
            raise IwareError("weights must lie on the probability simplex")
        self.weights = w

    # -- batched prediction ------------------------------------------------
    def member_outputs(self, X: np.ndarray):
        """Per-learner probabilities and variances for query rows.

        Returns (P, V) of shape (n, I); V is 0 for learners without a
        native variance (their contribution to uncertainty is then only
        the spread between members).
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        probs, povs = [], []
        for lrn in self.learners:
            p, v = lrn.predict_proba(X)
            probs.append(_clamp_probs(p))
            povs.append(np.zeros(X.shape[0]) if v is None else np.maximum(v, 0.0))
        return np.column_stack(probs), np.column_stack(povs)

    def combine_at_effort(self, P: np.ndarray, V: np.ndarray, effort: float):
        """Qualified, renormalized mixture mean and raw mixture variance."""
        q = self.thresholds.qualified(effort)
        w = self.weights[q]
        total = w.sum()
        w = w / total if total > 0 else np.full(q.sum(), 1.0 / q.sum())
        p, v = P[:, q], V[:, q]
        g = p @ w
        second = (v + p**2) @ w
        return g, np.maximum(second - g**2, 0.0)

    def predict_rows(self, X: np.ndarray, effort: float):
        P, V = self.member_outputs(X)
        return self.combine_at_effort(P, V, effort)

    def squash(self, var_raw) -> np.ndarray:
        return squash_uncertainty(var_raw, self.squash_scale)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "thresholds": [float(t) for t in self.thresholds.thresholds],
            "weights": [float(w) for w in self.weights],
            "learner_kind": self.learner_kind,
            "squash_scale": float(self.squash_scale),
            "n_features": int(self.n_features),
            "learners": [serialize_learner(l) for l in self.learners],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IWareEnsemble":
        if d.get("version") != 1:
            raise IwareError(f"unsupported ensemble document version {d.get('version')!r}")
        return cls(
            thresholds=ThresholdSet(thresholds=tuple(d["thresholds"])),
            learners=[deserialize_learner(b) for b in d["learners"]],
            weights=np.asarray(d["weights"], dtype=float),
            learner_kind=d["learner_kind"],
            squash_scale=float(d["squash_scale"]),
            n_features=int(d["n_features"]),
        )


def predict_effort_conditioned(ens: IWareEnsemble, query: RiskQuery) -> tuple[float, float]:
    """(probability, raw mixture variance) at the query's effort level.

    Probability is the renormalized weighted mean over qualified learners;
    the variance is the mixture variance, counting both per-learner
    variances and the spread between learner means.
    """
    if query.features.shape != (ens.n_features,):
        raise IwareError(f"expected {ens.n_features} features, got {query.features.shape}")
    g, v = ens.predict_rows(query.features[None, :], query.hypothetical_effort)
    return float(g[0]), float(v[0])


def squash_uncertainty(var_raw, scale: float) -> np.ndarray | float:
    """Map raw variance [0, inf) into [0, 1): 2*sigmoid(v/scale) - 1.

    Saturating inputs are clamped just below 1 so the squashed range stays
    half-open even in floating point.
    """
    v = np.asarray(var_raw, dtype=float)
    if np.any(v < 0):
        raise IwareError("raw variance must be nonnegative")
    out = 2.0 / (1.0 + np.exp(-v / scale)) - 1.0
    out = np.minimum(out, np.nextafter(1.0, 0.0))
    return float(out) if np.isscalar(var_raw) else out


def _fit_learner(kind: str, data: TrainMatrix, rng, options: dict):
    if kind == "trees":
        return train_bagged(
            data,
            num_trees=options.get("num_trees", 25),
            balanced=options.get("balanced", True),
            rng=rng,
            undersample_ratio=options.get("undersample_ratio", 1.0),
            max_depth=options.get("max_depth", 10),
            min_leaf=options.get("min_leaf", 1),
            feature_subsample=options.get("feature_subsample", "sqrt"),
        )
    if kind == "gp":
        cfg = options.get("kernel_config") or GpKernelConfig(
            lengthscale=options.get("lengthscale"),
            signal_var=options.get("signal_var", 1.0),
            jitter=options.get("jitter", 1e-6),
            optimize_hypers=options.get("optimize_hypers", False),
        )
        return train_gp(data, cfg, max_points=options.get("max_points", 400), rng=rng)
    raise IwareError(f"unknown learner kind {kind!r}; choose from {LEARNER_KINDS}")


def _stratified_folds(y: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per row; positives and negatives dealt round-robin."""
    assign = np.empty(y.shape[0], dtype=np.int32)
    for cls in (True, False):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = np.arange(idx.size) % folds
    return assign


def train_iware(
    ds: PatrolDataset,
    I: int,
    learner_kind: str = "trees",
    rng=None,
    folds: int = 5,
    **options,
) -> IWareEnsemble:
    """Full ensemble training.

    Thresholds from effort percentiles; per-threshold learners fit
    out-of-fold to collect unbiased validation predictions; weights
    optimized on those; learners refit on the full filtered subsets with
    identical hyperparameters. The squashing scale is the median raw
    mixture variance over the training rows at their observed efforts.
    """
    seed_root = rng if isinstance(rng, (int, np.integer)) else int(np.random.default_rng(rng).integers(2**62))
    ths = select_thresholds(ds, I)
    X, y, eff, row_ids = _dataset_rows(ds)
    n = X.shape[0]
    I_eff = ths.count

    if int(y.sum()) < folds:
        folds = max(2, int(y.sum()))
    fold_of = _stratified_folds(y, folds, np.random.default_rng([seed_root, 2]))

    P_oof = np.full((n, I_eff), 0.5)
    for f in range(folds):
        tr = fold_of != f
        va = ~tr
        for i, theta in enumerate(ths.thresholds):
            keep = tr & (y | (eff > theta))
            if not keep.any() or not y[keep].any():
                continue  # degenerate fold: leave the neutral 0.5 prediction
            sub = TrainMatrix(rows=X[keep], labels=y[keep], row_ids=row_ids[keep])
            model = _fit_learner(learner_kind, sub, np.random.default_rng([seed_root, 0, f, i]), options)
            P_oof[va, i] = _clamp_probs(model.predict_proba(X[va])[0])
    weights = optimize_weights_from_probs(P_oof, y)

    learners = []
    for i, theta in enumerate(ths.thresholds):
        sub = filter_dataset(ds, theta)
        learners.append(_fit_learner(learner_kind, sub, np.random.default_rng([seed_root, 1, i]), options))

    ens = IWareEnsemble(thresholds=ths, learners=learners, weights=weights,
                        learner_kind=learner_kind, squash_scale=1.0,
                        n_features=X.shape[1])
    P, V = ens.member_outputs(X)
    raw = np.empty(n)
    for theta_mask, effort in _group_by_qualified(ths, eff):
        _, v = ens.combine_at_effort(P[theta_mask], V[theta_mask], effort)
        raw[theta_mask] = v
    med = float(np.median(raw))
    if med <= 0:
        positive = raw[raw > 0]
        med = float(positive.mean()) if positive.size else 1.0
    ens.squash_scale = med
    return ens


def _group_by_qualified(ths: ThresholdSet, efforts: np.ndarray):
    """Group rows by which learners qualify; yields (row mask, rep effort)."""
    th = np.asarray(ths.thresholds)
    counts = np.searchsorted(th, efforts, side="right")  # qualified learner count
    for c in np.unique(counts):
        mask = counts == c
        yield mask, float(th[c - 1]) if c >= 1 else 0.0

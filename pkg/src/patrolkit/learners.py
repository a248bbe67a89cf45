"""Weak learners for the effort-aware ensemble.

Three families, one contract: ``predict_proba(X) -> (prob, latent_var)``
where ``latent_var`` is None for learners without a native uncertainty.

* CART decision trees with Gini splits; leaves store positive fractions.
  Ties are broken by lowest feature index, then lowest threshold, so
  training is deterministic under a fixed rng.
* Balanced bagging: each tree sees a bootstrap of the positives plus an
  undersample of the negatives. Bootstrap membership counts are recorded
  so the infinitesimal-jackknife variance of the bagged prediction can be
  computed afterwards.
* A Gaussian-process classifier (RBF kernel, logistic likelihood, Laplace
  approximation). Probabilities come from the probit approximation of the
  averaged predictive; the exposed latent variance is the noise-free
  posterior variance of the latent function given the training inputs,
  which vanishes at training points and reverts to the signal variance far
  from data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import pdist


class LearnerError(ValueError):
    """Invalid training data or configuration."""


def ensure_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class TrainMatrix:
    """Feature rows with binary labels and bookkeeping row ids."""

    rows: np.ndarray     # (n, d) float
    labels: np.ndarray   # (n,) bool
    row_ids: np.ndarray  # (n,) int, identifiers into the source dataset

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels, dtype=bool)
        ids = np.asarray(self.row_ids, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise LearnerError("rows must be a nonempty (n, d) matrix")
        if labels.shape != (rows.shape[0],) or ids.shape != (rows.shape[0],):
            raise LearnerError("labels/row_ids must align with rows")
        if not np.all(np.isfinite(rows)):
            raise LearnerError("rows contain non-finite values")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_ids", ids)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


# ---------------------------------------------------------------------------
# Decision trees
# ---------------------------------------------------------------------------

@dataclass
class DecisionTree:
    """CART tree in flat-array form; feature[i] == -1 marks a leaf."""

    feature: np.ndarray    # (nodes,) int32
    threshold: np.ndarray  # (nodes,) float
    left: np.ndarray       # (nodes,) int32
    right: np.ndarray      # (nodes,) int32
    value: np.ndarray      # (nodes,) float, positive fraction (leaves)
    max_depth: int
    min_leaf: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feats = self.feature[node]
            active = np.flatnonzero(feats >= 0)
            if active.size == 0:
                break
            f = feats[active]
            goleft = X[active, f] <= self.threshold[node[active]]
            node[active] = np.where(goleft, self.left[node[active]], self.right[node[active]])
        return self.value[node]

    def depth(self) -> int:
        def walk(i, d):
            if self.feature[i] < 0:
                return d
            return max(walk(self.left[i], d + 1), walk(self.right[i], d + 1))
        return walk(0, 0)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=float),
            max_depth=int(d["max_depth"]),
            min_leaf=int(d["min_leaf"]),
        )


def _best_split(X, y, feat_ids, min_leaf):
    """Lowest weighted-Gini split; returns (gini, feature, threshold) or None.

    Iterating features in ascending order and taking strict improvements
    implements the tie-break: lowest feature index, then lowest threshold.
    """
    n = y.shape[0]
    total_pos = int(y.sum())
    best = None
    for f in feat_ids:
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cum_pos = np.cumsum(y[order])
        left_n = np.arange(1, n)
        right_n = n - left_n
        valid = (xs[:-1] < xs[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        left_pos = cum_pos[:-1]
        right_pos = total_pos - left_pos
        with np.errstate(invalid="ignore"):
            pl = left_pos / left_n
            pr = right_pos / right_n
        gini = (left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)) / n
        gini = np.where(valid, gini, np.inf)
        i = int(np.argmin(gini))  # first occurrence -> lowest threshold
        if best is None or gini[i] < best[0]:
            best = (float(gini[i]), int(f), float(0.5 * (xs[i] + xs[i + 1])))
    return best


def train_tree(
    data: TrainMatrix,
    max_depth: int = 12,
    min_leaf: int = 1,
    feature_subsample: int | None = None,
    rng=None,
) -> DecisionTree:
    """Greedy CART fit. ``feature_subsample`` draws that many candidate
    features per node from rng (all features when None)."""
    if data.n < min_leaf:
        raise LearnerError(f"need at least min_leaf={min_leaf} rows")
    rng = ensure_rng(rng)
    X, y = data.rows, data.labels
    d = data.d

    feature = [0]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    value = [0.0]

    stack = [(0, np.arange(data.n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ysub = y[idx]
        pos_frac = float(ysub.mean())
        value[node] = pos_frac
        if depth >= max_depth or idx.size < 2 * min_leaf or pos_frac in (0.0, 1.0):
            feature[node] = -1
            continue
        if feature_subsample is not None and feature_subsample < d:
            feats = np.sort(rng.choice(d, size=feature_subsample, replace=False))
        else:
            feats = np.arange(d)
        split = _best_split(X[idx], ysub, feats, min_leaf)
        if split is None:
            feature[node] = -1
            continue
        _, f, thr = split
        goleft = X[idx, f] <= thr
        li, ri = len(feature), len(feature) + 1
        feature[node], threshold[node] = f, thr
        left[node], right[node] = li, ri
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
        stack.append((li, idx[goleft], depth + 1))
        stack.append((ri, idx[~goleft], depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=float),
        max_depth=max_depth,
        min_leaf=min_leaf,
    )


# ---------------------------------------------------------------------------
# Balanced bagging + infinitesimal jackknife
# ---------------------------------------------------------------------------

@dataclass
class BaggedClassifier:
    """Bag of trees with recorded bootstrap memberships."""

    trees: list[DecisionTree]
    memberships: np.ndarray         # (B, n_train) int32 draw counts
    undersample_ratio: float
    balanced: bool
    n_features: int

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise LearnerError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.stack([t.predict(X) for t in self.trees])  # (B, nq)

    def predict_proba(self, X: np.ndarray):
        votes = self.tree_votes(X)
        return votes.mean(axis=0), None

    def to_dict(self) -> dict:
        sparse = []
        for row in self.memberships:
            nz = np.flatnonzero(row)
            sparse.append([[int(j), int(row[j])] for j in nz])
        return {
            "kind": "bagged_trees",
            "trees": [t.to_dict() for t in self.trees],
            "n_train": int(self.memberships.shape[1]),
            "memberships": sparse,
            "undersample_ratio": float(self.undersample_ratio),
            "balanced": bool(self.balanced),
            "n_features": int(self.n_features),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BaggedClassifier":
        n = int(d["n_train"])
        mem = np.zeros((len(d["memberships"]), n), dtype=np.int32)
        for b, pairs in enumerate(d["memberships"]):
            for j, c in pairs:
                mem[b, j] = c
        return cls(
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            memberships=mem,
            undersample_ratio=float(d["undersample_ratio"]),
            balanced=bool(d["balanced"]),
            n_features=int(d["n_features"]),
        )


def train_bagged(
    data: TrainMatrix,
    num_trees: int = 50,
    balanced: bool = True,
    rng=None,
    undersample_ratio: float = 1.0,
    max_depth: int = 12,
    min_leaf: int = 1,
    feature_subsample: int | str | None = "sqrt",
) -> BaggedClassifier:
    """Bagging with optional class balancing.

    Balanced mode bootstraps the positives and draws an undersample of the
    negatives (without replacement) at ``undersample_ratio`` negatives per
    positive, so each tree trains on roughly 1:1 data however extreme the
    original imbalance. Plain mode uses ordinary bootstrap resamples.
    """
    rng = ensure_rng(rng)
    if num_trees < 1:
        raise LearnerError("num_trees must be >= 1")
    pos = np.flatnonzero(data.labels)
    neg = np.flatnonzero(~data.labels)
    if balanced and pos.size == 0:
        raise LearnerError("balanced bagging needs at least one positive row")
    if feature_subsample == "sqrt":
        feature_subsample = max(1, math.ceil(math.sqrt(data.d)))

    trees = []
    memberships = np.zeros((num_trees, data.n), dtype=np.int32)
    for b, child in enumerate(rng.spawn(num_trees)):
        if balanced:
            take_pos = child.choice(pos, size=pos.size, replace=True)
            n_neg = min(neg.size, max(1, round(undersample_ratio * pos.size)))
            take_neg = child.choice(neg, size=n_neg, replace=False) if n_neg else np.empty(0, int)
            sample = np.concatenate([take_pos, take_neg])
        else:
            sample = child.choice(data.n, size=data.n, replace=True)
        memberships[b] = np.bincount(sample, minlength=data.n)
        sub = TrainMatrix(rows=data.rows[sample], labels=data.labels[sample],
                          row_ids=data.row_ids[sample])
        trees.append(train_tree(sub, max_depth=max_depth, min_leaf=min_leaf,
                                feature_subsample=feature_subsample, rng=child))
    return BaggedClassifier(trees=trees, memberships=memberships,
                            undersample_ratio=undersample_ratio, balanced=balanced,
                            n_features=data.d)


def predict_bagged(model: BaggedClassifier, x: np.ndarray):
    """(probability, per-tree votes) for one query row."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise LearnerError("predict_bagged takes a single feature vector")
    votes = model.tree_votes(x[None, :])[:, 0]
    return float(votes.mean()), votes


def jackknife_variance(model: BaggedClassifier, x: np.ndarray) -> float | None:
    """Infinitesimal-jackknife variance of the bagged prediction at x.

    Sums the squared bootstrap covariance between draw counts and tree
    predictions over training points, then applies the finite-B bias
    correction, flooring at zero. None for a single tree (undefined).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise LearnerError("jackknife_variance takes a single feature vector")
    out = jackknife_variance_batch(model, x[None, :])
    return None if out is None else float(out[0])


def jackknife_variance_batch(model: BaggedClassifier, X: np.ndarray,
                             chunk: int = 64) -> np.ndarray | None:
    """Infinitesimal-jackknife variance for many query rows at once.

    The finite-B bias correction uses the empirical variance of the draw
    counts, sum_j Var_b(N_bj) * Var_b(t) / B. Under a plain size-n
    bootstrap Var(N_j) is about 1 and this reduces to the usual n/B term;
    with balanced undersampling only the rows a bag can actually draw
    contribute, which keeps the correction on the scale of the bags rather
    than the full dataset.
    """
    B = model.num_trees
    if B < 2:
        return None
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n_c = (model.memberships - model.memberships.mean(axis=0, keepdims=True)).astype(float)
    sum_var_n = float((n_c**2).mean(axis=0).sum())
    out = np.empty(X.shape[0])
    for lo in range(0, X.shape[0], chunk):
        votes = model.tree_votes(X[lo:lo + chunk])           # (B, q)
        t_c = votes - votes.mean(axis=0, keepdims=True)
        cov = n_c.T @ t_c / B                                # (n_train, q)
        raw = (cov**2).sum(axis=0)
        bias = sum_var_n / B * (t_c**2).mean(axis=0)
        out[lo:lo + chunk] = np.maximum(raw - bias, 0.0)
    return out


# ---------------------------------------------------------------------------
# Gaussian-process classifier (Laplace approximation)
# ---------------------------------------------------------------------------

@dataclass
class GpKernelConfig:
    lengthscale: float | None = None  # None -> median pairwise distance
    signal_var: float = 1.0
    jitter: float = 1e-6
    optimize_hypers: bool = False


def _rbf(sqdist: np.ndarray, lengthscale: float, signal_var: float) -> np.ndarray:
    return signal_var * np.exp(-0.5 * sqdist / lengthscale**2)


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = (A**2).sum(axis=1)[:, None] + (B**2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


@dataclass
class GpClassifier:
    """Laplace-approximation GP classifier state.

    Kept after training: the (possibly subsampled) inputs, the latent
    posterior mode and its likelihood gradient, the Cholesky factor of
    B = I + sqrt(W) K sqrt(W) used for predictions, and the Cholesky factor
    of K + jitter*I used for the exposed latent variance.
    """

    X: np.ndarray
    y_sign: np.ndarray           # (n,) in {-1, +1}
    lengthscale: float
    signal_var: float
    jitter: float
    f_mode: np.ndarray = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)
    _sqrt_w: np.ndarray = field(repr=False, default=None)
    _L_b: np.ndarray = field(repr=False, default=None)
    _L_k: np.ndarray = field(repr=False, default=None)
    log_marginal_likelihood: float = 0.0

    def kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return _rbf(_sqdist(A, B), self.lengthscale, self.signal_var)

    def predict_proba(self, Xq: np.ndarray):
        """(probability, latent variance) for query rows.

        Probability uses the probit approximation of the logistic averaged
        over the Laplace latent posterior. The latent variance is the
        noise-free GP posterior variance at the query given the training
        inputs: zero (up to jitter) at training points, signal_var far away.
        """
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        ks = self.kernel(self.X, Xq)                      # (n, q)
        mean = ks.T @ self._alpha
        v = solve_triangular(self._L_b, self._sqrt_w[:, None] * ks, lower=True)
        var_lap = np.maximum(self.signal_var - (v**2).sum(axis=0), 0.0)
        prob = _sigmoid_stable(mean / np.sqrt(1.0 + np.pi * var_lap / 8.0))
        u = solve_triangular(self._L_k, ks, lower=True)
        var_latent = np.maximum(self.signal_var - (u**2).sum(axis=0), 0.0)
        return prob, var_latent

    def to_dict(self) -> dict:
        return {
            "kind": "gp",
            "X": [[float(v) for v in row] for row in self.X],
            "y_sign": [int(v) for v in self.y_sign],
            "lengthscale": float(self.lengthscale),
            "signal_var": float(self.signal_var),
            "jitter": float(self.jitter),
            "f_mode": [float(v) for v in self.f_mode],
            "dual_weights": [float(v) for v in self._alpha],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GpClassifier":
        model = cls(
            X=np.asarray(d["X"], dtype=float),
            y_sign=np.asarray(d["y_sign"], dtype=float),
            lengthscale=float(d["lengthscale"]),
            signal_var=float(d["signal_var"]),
            jitter=float(d["jitter"]),
        )
        _finalize_gp(model)
        return model


def _sigmoid_stable(x):
    out = np.empty_like(np.asarray(x, dtype=float))
    x = np.asarray(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x):
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


def _newton_mode(K: np.ndarray, y: np.ndarray, tol: float = 1e-6, max_iter: int = 100):
    """Find the latent posterior mode (logistic likelihood).

    Returns (f_mode, sqrt_w, L_b, lml). Raises on Cholesky failure; the
    caller escalates jitter.
    """
    n = K.shape[0]
    t = (y + 1.0) / 2.0
    f = np.zeros(n)
    eye = np.eye(n)
    for _ in range(max_iter):
        pi = _sigmoid_stable(f)
        w = pi * (1.0 - pi)
        sw = np.sqrt(w)
        B = eye + sw[:, None] * K * sw[None, :]
        L = np.linalg.cholesky(B)
        b = w * f + (t - pi)
        rhs = sw * (K @ b)
        a = b - sw * solve_triangular(L.T, solve_triangular(L, rhs, lower=True), lower=False)
        f_new = K @ a
        delta = float(np.max(np.abs(f_new - f)))
        f = f_new
        if delta < tol:
            break
    pi = _sigmoid_stable(f)
    sw = np.sqrt(pi * (1.0 - pi))
    B = eye + sw[:, None] * K * sw[None, :]
    L = np.linalg.cholesky(B)
    alpha = t - pi
    lml = float(-0.5 * alpha @ f + _log_sigmoid(y * f).sum() - np.log(np.diag(L)).sum())
    return f, sw, L, lml


def _finalize_gp(model: GpClassifier) -> None:
    # Mode finding is deterministic, so loading a serialized model and
    # training afresh produce identical state.
    K = model.kernel(model.X, model.X) + model.jitter * np.eye(model.X.shape[0])
    f, sw, L, lml = _newton_mode(K, model.y_sign)
    pi = _sigmoid_stable(f)
    model.f_mode = f
    model._alpha = (model.y_sign + 1.0) / 2.0 - pi
    model._sqrt_w = sw
    model._L_b = L
    model._L_k = np.linalg.cholesky(K)
    model.log_marginal_likelihood = lml


def median_heuristic_lengthscale(X: np.ndarray) -> float:
    """Median nonzero pairwise Euclidean distance; 1.0 for degenerate data."""
    if X.shape[0] < 2:
        return 1.0
    d = pdist(X)
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def _stratified_cap(labels: np.ndarray, max_points: int, rng: np.random.Generator) -> np.ndarray:
    """Indices capped at max_points, keeping every positive row."""
    n = labels.shape[0]
    if n <= max_points:
        return np.arange(n)
    pos = np.flatnonzero(labels)
    neg = np.flatnonzero(~labels)
    room = max(max_points - pos.size, 0)
    take_neg = np.sort(rng.choice(neg, size=min(room, neg.size), replace=False)) if room else np.empty(0, int)
    return np.sort(np.concatenate([pos, take_neg]))


def train_gp(
    data: TrainMatrix,
    kernel_config: GpKernelConfig | None = None,
    max_points: int = 1000,
    rng=None,
) -> GpClassifier:
    """Fit the Laplace GP on (at most) max_points stratified rows.

    Newton iterations run until the mode moves by less than 1e-6 or 100
    iterations. On Cholesky failure the jitter is escalated tenfold up to
    1e-2 before giving up.
    """
    cfg = kernel_config or GpKernelConfig()
    rng = ensure_rng(rng)
    keep = _stratified_cap(data.labels, max_points, rng)
    if keep.size < 2:
        raise LearnerError("GP needs at least two rows after subsampling")
    X = data.rows[keep]
    y = np.where(data.labels[keep], 1.0, -1.0)
    ell = cfg.lengthscale if cfg.lengthscale is not None else median_heuristic_lengthscale(X)

    jitter = cfg.jitter
    last_err = None
    while jitter <= 1e-2:
        model = GpClassifier(X=X, y_sign=y, lengthscale=ell,
                             signal_var=cfg.signal_var, jitter=jitter)
        try:
            _finalize_gp(model)
        except np.linalg.LinAlgError as err:
            last_err = err
            jitter = jitter * 10 if jitter > 0 else 1e-8
            continue
        if cfg.optimize_hypers:
            _optimize_hypers(model)
        return model
    raise LearnerError(f"kernel matrix not positive definite up to jitter 1e-2: {last_err}")


def predict_gp(model: GpClassifier, x: np.ndarray):
    """(probability, latent variance) for a single query row."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise LearnerError("predict_gp takes a single feature vector")
    prob, var = model.predict_proba(x[None, :])
    return float(prob[0]), float(var[0])


def gp_lml_and_gradient(model: GpClassifier, lengthscale=None, signal_var=None):
    """Laplace log marginal likelihood and its gradient.

    Evaluated at the given hyperparameters (defaults to the model's own),
    refinding the mode there. Returns (lml, dlml/dlengthscale,
    dlml/dsignal_var); the gradient accounts for the dependence of the
    mode on the hyperparameters.
    """
    ell = model.lengthscale if lengthscale is None else float(lengthscale)
    sv = model.signal_var if signal_var is None else float(signal_var)
    X, y = model.X, model.y_sign
    n = X.shape[0]
    d2 = _sqdist(X, X)
    K_rbf = _rbf(d2, ell, sv)
    K = K_rbf + model.jitter * np.eye(n)
    f, sw, L, lml = _newton_mode(K, y)
    pi = _sigmoid_stable(f)
    alpha = (y + 1.0) / 2.0 - pi

    # R = sqrt(W) B^-1 sqrt(W); posterior covariance diag via C = L \ (sW K)
    R = sw[:, None] * cho_solve((L, True), np.diag(sw))
    C = solve_triangular(L, sw[:, None] * K, lower=True)
    post_diag = np.diag(K) - (C**2).sum(axis=0)
    dw_df = pi * (1.0 - pi) * (1.0 - 2.0 * pi)   # dW/df
    s2 = -0.5 * post_diag * dw_df                # dZ/df at the mode

    grads = []
    for dK in (K_rbf * d2 / ell**3, K_rbf / sv):
        s1 = 0.5 * alpha @ (dK @ alpha) - 0.5 * np.sum(R * dK)
        b = dK @ alpha
        s3 = b - K @ (R @ b)
        grads.append(float(s1 + s2 @ s3))
    return lml, grads[0], grads[1]


def _optimize_hypers(model: GpClassifier) -> None:
    """ML-II on (log lengthscale, log signal variance) via L-BFGS-B."""
    from scipy.optimize import minimize

    def objective(theta):
        ell, sv = np.exp(theta)
        lml, g_ell, g_sv = gp_lml_and_gradient(model, ell, sv)
        return -lml, -np.array([g_ell * ell, g_sv * sv])

    x0 = np.log([model.lengthscale, model.signal_var])
    res = minimize(objective, x0, jac=True, method="L-BFGS-B",
                   bounds=[(-5, 8), (-6, 6)], options={"maxiter": 50})
    ell, sv = np.exp(res.x)
    model.lengthscale = float(ell)
    model.signal_var = float(sv)
    _finalize_gp(model)


def serialize_learner(model) -> dict:
    return model.to_dict()


def deserialize_learner(blob: dict):
    kind = blob.get("kind")
    if kind == "bagged_trees":
        return BaggedClassifier.from_dict(blob)
    if kind == "gp":
        return GpClassifier.from_dict(blob)
    raise LearnerError(f"unknown learner kind {kind!r}")

"""Point classifiers: a from-scratch seeded random forest and a
deterministic logistic-regression baseline.

The forest is fully deterministic given its seed (per-tree seeds derive from
it), which is what lets the seed-variability study attribute variance to the
seed alone. The logistic model contains no randomness at all: zero-initialized
full-batch gradient descent with a fixed iteration count.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _forest_core
from .data import NEGATIVE, POSITIVE, Dataset
from .errors import DimensionMismatch, NonFiniteLoss, SingleClassTraining
from .seeding import derive_seed


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 300
    max_depth: int = 20
    min_leaf: int = 1
    features_per_split: int | None = None  # None -> floor(sqrt(dim))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("n_trees, max_depth and min_leaf must be >= 1")


@dataclass(frozen=True)
class LogisticParams:
    l2: float = 1e-3
    learning_rate: float = 0.1
    iterations: int = 500

    def __post_init__(self):
        if self.l2 < 0 or self.learning_rate <= 0 or self.iterations < 1:
            raise ValueError("require l2 >= 0, learning_rate > 0, iterations >= 1")


def _as_matrix(model_dim, x):
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != model_dim:
        raise DimensionMismatch(
            f"expected {model_dim} features, got {X.shape[1]}"
        )
    return X


@dataclass
class RandomForestModel:
    kind = "random_forest"
    params: ForestParams
    dim: int
    n_positive: int
    n_negative: int
    _feature: np.ndarray
    _threshold: np.ndarray
    _left: np.ndarray
    _right: np.ndarray
    _value: np.ndarray
    _counts: np.ndarray

    def predict_proba(self, x):
        """Positive-class probability: mean over trees of the landed leaf's
        positive-class proportion. Accepts one instance or a matrix."""
        X = _as_matrix(self.dim, x)
        out = _forest_core.forest_proba(
            self._feature, self._threshold, self._left, self._right, self._value, X
        )
        return float(out[0]) if np.ndim(x) == 1 else out

    def tree_depths(self):
        return _forest_core.tree_depths(
            self._feature, self._left, self._right, self._counts
        )

    def label(self):
        k = self.params.features_per_split
        return (
            f"random_forest(trees={self.params.n_trees},depth={self.params.max_depth},"
            f"min_leaf={self.params.min_leaf},"
            f"features_per_split={'auto' if k is None else k},seed={self.params.seed})"
        )

    def to_json(self):
        """Debug dump: one nested node dict per tree. Not a stable format."""

        def node(t, i):
            if self._feature[t, i] < 0:
                return {"leaf": True, "p_positive": float(self._value[t, i])}
            return {
                "leaf": False,
                "feature": int(self._feature[t, i]),
                "threshold": float(self._threshold[t, i]),
                "left": node(t, int(self._left[t, i])),
                "right": node(t, int(self._right[t, i])),
            }

        return {"kind": self.kind, "trees": [node(t, 0) for t in range(self.params.n_trees)]}


@dataclass
class LogisticModel:
    kind = "logistic"
    params: LogisticParams
    dim: int
    n_positive: int
    n_negative: int
    weights: np.ndarray  # (dim + 1,): feature weights then intercept

    def predict_proba(self, x):
        X = _as_matrix(self.dim, x)
        scores = X @ self.weights[:-1] + self.weights[-1]
        out = expit(scores)
        return float(out[0]) if np.ndim(x) == 1 else out

    def label(self):
        return (
            f"logistic(l2={self.params.l2},learning_rate={self.params.learning_rate},"
            f"iterations={self.params.iterations})"
        )

    def to_json(self):
        return {"kind": self.kind, "weights": [float(w) for w in self.weights]}


def _check_both_classes(ds):
    if ds.n_positive == 0 or ds.n_negative == 0:
        raise SingleClassTraining("training data must contain both classes")


def resolve_features_per_split(params, dim):
    k = params.features_per_split
    if k is None:
        k = int(math.floor(math.sqrt(dim)))
    return max(1, min(k, dim))


def train_random_forest(ds, params):
    _check_both_classes(ds)
    k = resolve_features_per_split(params, ds.dim)
    seeds = np.array(
        [derive_seed(params.seed, [("tree", t)]) for t in range(params.n_trees)],
        dtype=np.uint64,
    )
    feature, threshold, left, right, value, counts = _forest_core.train_forest(
        ds.X, ds.y, params.n_trees, params.max_depth, params.min_leaf, k, seeds
    )
    return RandomForestModel(
        params=params,
        dim=ds.dim,
        n_positive=ds.n_positive,
        n_negative=ds.n_negative,
        _feature=feature,
        _threshold=threshold,
        _left=left,
        _right=right,
        _value=value,
        _counts=counts,
    )


def logistic_loss_grad(w, X1, y, l2):
    """L2-regularized mean log-loss and its gradient.

    The intercept (last weight) is not penalized. Uses log1p(exp(.)) via
    logaddexp for stability.
    """
    n = X1.shape[0]
    scores = X1 @ w
    # log-loss: mean over i of log(1 + exp(-s_i)) if y=1 else log(1 + exp(s_i))
    signed = np.where(y == POSITIVE, -scores, scores)
    loss = float(np.mean(np.logaddexp(0.0, signed)))
    loss += 0.5 * l2 * float(w[:-1] @ w[:-1])
    p = expit(scores)
    grad = X1.T @ (p - (y == POSITIVE)) / n
    grad[:-1] += l2 * w[:-1]
    return loss, grad


def train_logistic(ds, params):
    _check_both_classes(ds)
    X1 = np.hstack([ds.X, np.ones((ds.n, 1))])
    w = np.zeros(ds.dim + 1)
    for _ in range(params.iterations):
        _, grad = logistic_loss_grad(w, X1, ds.y, params.l2)
        w = w - params.learning_rate * grad
        if not np.all(np.isfinite(w)):
            raise NonFiniteLoss("gradient descent diverged to non-finite weights")
    return LogisticModel(
        params=params,
        dim=ds.dim,
        n_positive=ds.n_positive,
        n_negative=ds.n_negative,
        weights=w,
    )


def train_model(ds, kind, forest_params, logistic_params):
    if kind == "random_forest":
        return train_random_forest(ds, forest_params)
    if kind == "logistic":
        return train_logistic(ds, logistic_params)
    raise ValueError(f"unknown model kind {kind!r}")


def predict_proba(model, x):
    return model.predict_proba(x)


def predict_label(model, x, threshold=0.5):
    """POSITIVE iff probability strictly exceeds the threshold.

    A probability exactly equal to the threshold resolves to NEGATIVE; the
    rule is arbitrary but must be fixed, because label flip-flop under seed
    changes happens exactly around it.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    proba = model.predict_proba(x)
    if np.ndim(proba) == 0:
        return POSITIVE if proba > threshold else NEGATIVE
    return np.where(proba > threshold, POSITIVE, NEGATIVE)

"""Mondrian (class-conditional) inductive conformal prediction.

Nonconformity is the inverse-probability score 1 - P(class). p-values use
the non-smoothed "+1, >=" rule: ties between the candidate score and
calibration scores count toward the numerator, comparisons are plain
numeric with no tolerance, so results are bit-stable. A class enters the
prediction set iff its p-value strictly exceeds the significance level.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import NEGATIVE, POSITIVE
from .errors import EmptyClassCalibration


class PredictionSet(Enum):
    POSITIVE_ONLY = "positive"
    NEGATIVE_ONLY = "negative"
    BOTH = "both"
    EMPTY = "empty"

    @property
    def includes_positive(self):
        return self in (PredictionSet.POSITIVE_ONLY, PredictionSet.BOTH)

    @property
    def includes_negative(self):
        return self in (PredictionSet.NEGATIVE_ONLY, PredictionSet.BOTH)

    def covers(self, label):
        return self.includes_positive if label == POSITIVE else self.includes_negative


@dataclass(frozen=True)
class Epsilon:
    """Significance level; confidence = 1 - significance."""

    significance: float

    def __post_init__(self):
        if not (0.0 < self.significance < 1.0):
            raise ValueError("significance must lie strictly inside (0, 1)")

    @property
    def confidence(self):
        return 1.0 - self.significance


# report grid: confidence 70%, 80%, 90%
DEFAULT_EPSILON_GRID = (0.3, 0.2, 0.1)


@dataclass(frozen=True)
class PValuePair:
    p_pos: float
    p_neg: float


@dataclass(frozen=True)
class CalibrationTable:
    """Per-class sorted nonconformity scores of the calibration set."""

    pos_scores: np.ndarray
    neg_scores: np.ndarray

    def __post_init__(self):
        for name in ("pos_scores", "neg_scores"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.size == 0:
                raise EmptyClassCalibration(f"{name} is empty")
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)


def nonconformity(proba_pos, label):
    """Score 1 - P(label): 0 is perfectly conforming, 1 maximally not."""
    return 1.0 - proba_pos if label == POSITIVE else proba_pos


def build_calibration(model, calib):
    """Score each calibration instance against its true class, Mondrian-style."""
    if calib.n_positive == 0 or calib.n_negative == 0:
        raise EmptyClassCalibration("calibration set must contain both classes")
    probas = np.atleast_1d(model.predict_proba(calib.X))
    pos = 1.0 - probas[calib.y == POSITIVE]
    neg = probas[calib.y == NEGATIVE]
    return CalibrationTable(pos, neg)


def _p_value(scores, alpha):
    n = scores.shape[0]
    count_ge = n - int(np.searchsorted(scores, alpha, side="left"))
    return (count_ge + 1) / (n + 1)


def p_values(table, proba_pos):
    """p_c = (#{calibration score >= candidate score} + 1) / (n_c + 1)."""
    return PValuePair(
        p_pos=_p_value(table.pos_scores, nonconformity(proba_pos, POSITIVE)),
        p_neg=_p_value(table.neg_scores, nonconformity(proba_pos, NEGATIVE)),
    )


def p_values_batch(table, probas_pos):
    """Vectorized p_values over an array of positive-class probabilities."""
    probas = np.asarray(probas_pos, dtype=np.float64)
    n_pos = table.pos_scores.shape[0]
    n_neg = table.neg_scores.shape[0]
    ge_pos = n_pos - np.searchsorted(table.pos_scores, 1.0 - probas, side="left")
    ge_neg = n_neg - np.searchsorted(table.neg_scores, probas, side="left")
    return (ge_pos + 1) / (n_pos + 1), (ge_neg + 1) / (n_neg + 1)


def prediction_set(p, eps):
    """Include each class iff its p-value strictly exceeds eps.significance."""
    return _to_set(p.p_pos > eps.significance, p.p_neg > eps.significance)


def _to_set(has_pos, has_neg):
    if has_pos and has_neg:
        return PredictionSet.BOTH
    if has_pos:
        return PredictionSet.POSITIVE_ONLY
    if has_neg:
        return PredictionSet.NEGATIVE_ONLY
    return PredictionSet.EMPTY


def prediction_sets_batch(p_pos, p_neg, eps):
    return [
        _to_set(pp > eps.significance, pn > eps.significance)
        for pp, pn in zip(p_pos, p_neg)
    ]

"""Prediction-set evaluation: the 8-cell confusion tally, the _incl /
_excl / _uncertain_out metric families, the 'both'/'empty' scenario engine,
plain point-classifier metrics, and set-rate summaries.

All ratios are formed from integer counts and divided exactly once, so the
dominance relations between the metric families (adding correct
classifications cannot worsen a statistic) hold without rounding caveats.
A zero denominator raises MetricUndefined; it is never silently 0.
"""

from dataclasses import dataclass
from enum import Enum

from .data import NEGATIVE, POSITIVE
from .conformal import PredictionSet
from .errors import EmptyInput, LengthMismatch, MetricUndefined


@dataclass(frozen=True)
class McpConfusion:
    """Counts of (true class x prediction-set kind).

    Rows: true positive / true negative class. Columns: positive-only,
    negative-only, both, empty prediction sets.
    """

    tp: int = 0
    fn: int = 0
    bp: int = 0
    ep: int = 0
    fp: int = 0
    tn: int = 0
    bn: int = 0
    en: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.bp, self.ep, self.fp, self.tn, self.bn, self.en) < 0:
            raise ValueError("confusion cells must be nonnegative")

    @property
    def total_p(self):
        return self.tp + self.fn + self.bp + self.ep

    @property
    def total_n(self):
        return self.tn + self.fp + self.bn + self.en

    @property
    def total(self):
        return self.total_p + self.total_n

    def as_dict(self):
        return {
            "tp": self.tp, "fn": self.fn, "bp": self.bp, "ep": self.ep,
            "fp": self.fp, "tn": self.tn, "bn": self.bn, "en": self.en,
        }


@dataclass(frozen=True)
class BinaryConfusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricTriple:
    sensitivity: float
    specificity: float
    ccr: float


@dataclass(frozen=True)
class SetRates:
    both_rate: float
    empty_rate: float
    singleton_rate: float
    error_rate_positive: float
    error_rate_negative: float


class ScenarioPolicy(Enum):
    INCL = "incl"
    EXCL = "excl"
    UNCERTAIN_REMOVED = "uncertain_out"
    EMPTY_REMOVED_BOTH_POSITIVE = "empty_removed_both_positive"
    EMPTY_REMOVED_BOTH_NEGATIVE = "empty_removed_both_negative"
    EMPTY_REMOVED_BOTH_DOMINANT = "empty_removed_both_dominant"


ALL_SCENARIOS = tuple(p.value for p in ScenarioPolicy)


def _check_paired(truths, sets_or_labels):
    if len(truths) != len(sets_or_labels):
        raise LengthMismatch(
            f"{len(truths)} truths vs {len(sets_or_labels)} predictions"
        )
    if len(truths) == 0:
        raise EmptyInput("no instances to tally")


def tally(truths, sets):
    """Count each (true class, prediction set) pair into its confusion cell."""
    _check_paired(truths, sets)
    cells = {"tp": 0, "fn": 0, "bp": 0, "ep": 0, "fp": 0, "tn": 0, "bn": 0, "en": 0}
    for truth, pset in zip(truths, sets):
        if truth == POSITIVE:
            key = {
                PredictionSet.POSITIVE_ONLY: "tp",
                PredictionSet.NEGATIVE_ONLY: "fn",
                PredictionSet.BOTH: "bp",
                PredictionSet.EMPTY: "ep",
            }[pset]
        else:
            key = {
                PredictionSet.POSITIVE_ONLY: "fp",
                PredictionSet.NEGATIVE_ONLY: "tn",
                PredictionSet.BOTH: "bn",
                PredictionSet.EMPTY: "en",
            }[pset]
        cells[key] += 1
    return McpConfusion(**cells)


def _triple(tp, pos_den, tn, neg_den):
    if pos_den == 0:
        raise MetricUndefined("positive")
    if neg_den == 0:
        raise MetricUndefined("negative")
    sens = tp / pos_den
    spec = tn / neg_den
    return MetricTriple(sens, spec, (sens + spec) / 2.0)


def metrics_excl(c):
    """'Both' and 'empty' count as wrong: TP/TOTAL_P, TN/TOTAL_N."""
    return _triple(c.tp, c.total_p, c.tn, c.total_n)


def metrics_incl(c):
    """'Both' counts as correct: (TP+BP)/TOTAL_P, (TN+BN)/TOTAL_N.

    These statistics assume the true label of every 'both' prediction is
    known to be covered; they cannot decrease as 'both' predictions grow.
    Reports carry this caveat.
    """
    return _triple(c.tp + c.bp, c.total_p, c.tn + c.bn, c.total_n)


def metrics_uncertain_out(c):
    """'Both' and 'empty' instances dropped: TP/(TP+FN), TN/(TN+FP)."""
    return _triple(c.tp, c.tp + c.fn, c.tn, c.tn + c.fp)


def binary_metrics(bc):
    return _triple(bc.tp, bc.tp + bc.fn, bc.tn, bc.tn + bc.fp)


def point_metrics(truths, labels):
    """Standard sensitivity / specificity / CCR for single-label predictions."""
    _check_paired(truths, labels)
    tp = fp = tn = fn = 0
    for truth, label in zip(truths, labels):
        if truth == POSITIVE:
            if label == POSITIVE:
                tp += 1
            else:
                fn += 1
        else:
            if label == NEGATIVE:
                tn += 1
            else:
                fp += 1
    return binary_metrics(BinaryConfusion(tp=tp, fp=fp, tn=tn, fn=fn))


@dataclass(frozen=True)
class ScenarioResult:
    kept: int
    confusion: BinaryConfusion
    metrics: MetricTriple


def scenario_reduction(c, policy, dominant=None):
    """Reduce an 8-cell confusion to (kept count, binary confusion) under one
    policy. incl / excl keep every instance and credit or charge 'both'
    ('empty' always counts as wrong). uncertain_out drops 'both' and 'empty'
    instances. The empty_removed_* policies drop 'empty' and relabel 'both'
    as positive, negative, or the supplied dominant class."""
    n = c.total
    if policy is ScenarioPolicy.INCL:
        bc = BinaryConfusion(tp=c.tp + c.bp, fn=c.fn + c.ep, tn=c.tn + c.bn, fp=c.fp + c.en)
        kept = n
    elif policy is ScenarioPolicy.EXCL:
        bc = BinaryConfusion(tp=c.tp, fn=c.fn + c.bp + c.ep, tn=c.tn, fp=c.fp + c.bn + c.en)
        kept = n
    elif policy is ScenarioPolicy.UNCERTAIN_REMOVED:
        bc = BinaryConfusion(tp=c.tp, fn=c.fn, tn=c.tn, fp=c.fp)
        kept = bc.total
    else:
        if policy is ScenarioPolicy.EMPTY_REMOVED_BOTH_DOMINANT:
            if dominant not in (POSITIVE, NEGATIVE):
                raise ValueError("dominant class required for the dominant-class policy")
            both_as = dominant
        elif policy is ScenarioPolicy.EMPTY_REMOVED_BOTH_POSITIVE:
            both_as = POSITIVE
        elif policy is ScenarioPolicy.EMPTY_REMOVED_BOTH_NEGATIVE:
            both_as = NEGATIVE
        else:
            raise ValueError(f"unknown scenario policy {policy!r}")
        if both_as == POSITIVE:
            bc = BinaryConfusion(tp=c.tp + c.bp, fn=c.fn, tn=c.tn, fp=c.fp + c.bn)
        else:
            bc = BinaryConfusion(tp=c.tp, fn=c.fn + c.bp, tn=c.tn + c.bn, fp=c.fp)
        kept = n - c.ep - c.en

    return kept, bc


def apply_scenario(truths, sets, policy, dominant=None):
    """Tally the instances and evaluate one 'both'/'empty' handling policy;
    see scenario_reduction for the policies."""
    kept, bc = scenario_reduction(tally(truths, sets), policy, dominant)
    return ScenarioResult(kept=kept, confusion=bc, metrics=binary_metrics(bc))


def set_rates(truths, sets):
    """Fractions of both / empty / singleton outcomes plus per-class error
    rates (an instance errs when its set excludes the true label; 'empty'
    therefore always errs)."""
    _check_paired(truths, sets)
    n = len(truths)
    n_both = sum(1 for s in sets if s is PredictionSet.BOTH)
    n_empty = sum(1 for s in sets if s is PredictionSet.EMPTY)
    err_p = kept_p = err_n = kept_n = 0
    for truth, pset in zip(truths, sets):
        if truth == POSITIVE:
            kept_p += 1
            err_p += 0 if pset.covers(POSITIVE) else 1
        else:
            kept_n += 1
            err_n += 0 if pset.covers(NEGATIVE) else 1
    if kept_p == 0:
        raise MetricUndefined("positive")
    if kept_n == 0:
        raise MetricUndefined("negative")
    return SetRates(
        both_rate=n_both / n,
        empty_rate=n_empty / n,
        singleton_rate=(n - n_both - n_empty) / n,
        error_rate_positive=err_p / kept_p,
        error_rate_negative=err_n / kept_n,
    )

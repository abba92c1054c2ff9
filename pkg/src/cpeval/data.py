"""Datasets: CSV ingestion, synthetic generation, and seeded stratified splits.

Labels are binary: ``POSITIVE`` (active) and ``NEGATIVE`` (inactive).
All splitting is deterministic given (master_seed, explicit index); see
:mod:`cpeval.seeding`.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateRequest,
    EmptyDataset,
    InsufficientClassMembers,
    MissingColumn,
    NonNumericFeature,
    UnknownLabelValue,
)
from .seeding import derive_seed

POSITIVE = 1
NEGATIVE = 0

_LABEL_VALUES = {"1": POSITIVE, "active": POSITIVE, "0": NEGATIVE, "inactive": NEGATIVE}


@dataclass(frozen=True)
class LabeledInstance:
    features: tuple
    label: int
    id: str


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with binary labels and unique string ids."""

    X: np.ndarray  # (n, dim) float64
    y: np.ndarray  # (n,) int64, POSITIVE / NEGATIVE
    ids: tuple

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", tuple(self.ids))
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyDataset("dataset must contain at least one instance")
        if y.shape != (X.shape[0],) or len(self.ids) != X.shape[0]:
            raise ValueError("X, y and ids must have matching lengths")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("instance ids must be unique within a dataset")
        X.setflags(write=False)
        y.setflags(write=False)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def n_positive(self):
        return int(np.count_nonzero(self.y == POSITIVE))

    @property
    def n_negative(self):
        return int(np.count_nonzero(self.y == NEGATIVE))

    @property
    def instances(self):
        return [
            LabeledInstance(tuple(self.X[i]), int(self.y[i]), self.ids[i])
            for i in range(self.n)
        ]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], tuple(self.ids[i] for i in idx))

    def majority_label(self):
        """Majority class; an exact tie resolves to POSITIVE (documented)."""
        return POSITIVE if self.n_positive >= self.n_negative else NEGATIVE


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    calibration_fraction: float = 0.3
    stratified: bool = True
    repeats: int = 100
    master_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError("test_fraction must lie strictly inside (0, 1)")
        if not (0.0 < self.calibration_fraction < 1.0):
            raise ValueError("calibration_fraction must lie strictly inside (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def parse_label(value):
    key = str(value).strip().lower()
    if key not in _LABEL_VALUES:
        return None
    return _LABEL_VALUES[key]


def load_dataset(path, label_column="label"):
    """Load a CSV dataset: header row, one label column, optional `id` column,
    all remaining columns numeric features. Data rows are 0-indexed in errors.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} has no header row")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingColumn(f"label column {label_column!r} not found in {path}")
        label_pos = header.index(label_column)
        id_pos = header.index("id") if "id" in header else None
        feature_cols = [
            (j, name)
            for j, name in enumerate(header)
            if j != label_pos and j != id_pos
        ]

        rows_X, rows_y, ids = [], [], []
        for r, row in enumerate(reader):
            label = parse_label(row[label_pos])
            if label is None:
                raise UnknownLabelValue(r, row[label_pos])
            feats = []
            for j, name in feature_cols:
                try:
                    v = float(row[j])
                except (ValueError, IndexError):
                    raise NonNumericFeature(r, name)
                if not math.isfinite(v):
                    raise NonNumericFeature(r, name)
                feats.append(v)
            rows_X.append(feats)
            rows_y.append(label)
            ids.append(row[id_pos].strip() if id_pos is not None else str(r))

    if not rows_X:
        raise EmptyDataset(f"{path} contains no data rows")
    return Dataset(np.asarray(rows_X, dtype=np.float64), np.asarray(rows_y), tuple(ids))



def write_dataset_csv(path, ds):
    """Write the dataset in the canonical CSV layout: id, f0..f{d-1}, label."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"f{j}" for j in range(ds.dim)] + ["label"])
        for i in range(ds.n):
            label = "active" if ds.y[i] == POSITIVE else "inactive"
            writer.writerow([ds.ids[i]] + [repr(float(v)) for v in ds.X[i]] + [label])


def generate_synthetic(n, dim, class_balance, separation, seed):
    """Two-cluster isotropic Gaussian mixture.

    Positives centered at (+separation/2, 0, ...), negatives at
    (-separation/2, 0, ...), unit variance per coordinate. Exactly
    round(n * class_balance) positives (half-up rounding), listed first.
    """
    if n < 2 or dim < 1:
        raise DegenerateRequest("need n >= 2 and dim >= 1")
    n_pos = _round_half_up(n * class_balance)
    if n_pos == 0 or n_pos == n:
        raise DegenerateRequest(
            f"class balance {class_balance} leaves a class empty for n={n}"
        )
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    X[:n_pos, 0] += separation / 2.0
    X[n_pos:, 0] -= separation / 2.0
    y = np.concatenate([np.full(n_pos, POSITIVE), np.full(n - n_pos, NEGATIVE)])
    return Dataset(X, y, tuple(str(i) for i in range(n)))


def _holdout_split(ds, fraction, stratified, seed):
    """Partition ds into (rest, holdout) with |holdout| = round(n * fraction).

    Stratified mode allocates per-class holdout counts by largest-remainder
    against the quota n_holdout * n_c / n, so each class count is within one
    instance of exact proportionality. Both sides must keep both classes.
    """
    n = ds.n
    n_hold = _round_half_up(n * fraction)
    if n_hold < 1 or n - n_hold < 1:
        raise InsufficientClassMembers(f"holdout of {n_hold} from {n} instances")
    rng = np.random.default_rng(seed)

    if stratified:
        class_idx = [
            np.flatnonzero(ds.y == POSITIVE),
            np.flatnonzero(ds.y == NEGATIVE),
        ]
        quotas = [n_hold * len(ci) / n for ci in class_idx]
        takes = [int(math.floor(q)) for q in quotas]
        leftover = n_hold - sum(takes)
        if leftover:  # at most 1 with two classes; tie favors the positive class
            fracs = [q - t for q, t in zip(quotas, takes)]
            takes[0 if fracs[0] >= fracs[1] else 1] += leftover
        hold_parts = []
        for ci, take in zip(class_idx, takes):
            if take < 1 or len(ci) - take < 1:
                raise InsufficientClassMembers(
                    "a class cannot populate both sides of the split"
                )
            perm = rng.permutation(len(ci))
            hold_parts.append(ci[perm[:take]])
        hold = np.sort(np.concatenate(hold_parts))
    else:
        perm = rng.permutation(n)
        hold = np.sort(perm[:n_hold])

    mask = np.zeros(n, dtype=bool)
    mask[hold] = True
    rest = np.flatnonzero(~mask)
    rest_ds, hold_ds = ds.subset(rest), ds.subset(hold)
    for part in (rest_ds, hold_ds):
        if part.n_positive == 0 or part.n_negative == 0:
            raise InsufficientClassMembers("split left one side without both classes")
    return rest_ds, hold_ds


def split_train_test(ds, spec, repeat_index):
    """Disjoint (train, test) partition for one repeat of the protocol."""
    seed = derive_seed(spec.master_seed, [("split", repeat_index)])
    return _holdout_split(ds, spec.test_fraction, spec.stratified, seed)


def split_proper_calibration(train, spec, resample_index=0):
    """Split a training set into (proper, calibration).

    resample_index 0 is the default single split; the calibration-variability
    study ranges it over 0..K-1 to resample the calibration set.
    """
    seed = derive_seed(spec.master_seed, [("calibration", resample_index)])
    return _holdout_split(train, spec.calibration_fraction, spec.stratified, seed)

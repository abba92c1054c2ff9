"""Experiment orchestration.

run_repeated_split: the repeated 80/20 comparison between the point
classifier (one label per test instance) and Mondrian conformal prediction
(prediction sets at each significance level), with the 70/30
proper/calibration split done once per repeat.

run_seed_variability / run_calibration_variability: the two dedicated
variance studies (model seed; calibration resampling).

Every repeat / trial is a pure function of (master_seed, its index), so
the same config always reproduces the same result, in any execution order.
"""

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifiers import ForestParams, LogisticParams, train_model
from .conformal import (
    DEFAULT_EPSILON_GRID,
    Epsilon,
    build_calibration,
    prediction_sets_batch,
    p_values_batch,
)
from .data import (
    NEGATIVE,
    POSITIVE,
    SplitSpec,
    generate_synthetic,
    load_dataset,
    split_proper_calibration,
    split_train_test,
)
from .errors import (
    ConfigError,
    InstanceNeverTested,
    MetricUndefined,
    RepeatFailed,
)
from .metrics import (
    ALL_SCENARIOS,
    ScenarioPolicy,
    binary_metrics,
    point_metrics,
    scenario_reduction,
    set_rates,
    tally,
)
from .seeding import derive_seed

AGGREGATION_MODES = ("per_repeat", "per_compound_median")


@dataclass(frozen=True)
class SynthSpec:
    n: int
    dim: int
    balance: float = 0.5
    separation: float = 1.0


@dataclass(frozen=True)
class DataFileSpec:
    path: str
    label_column: str = "label"


@dataclass(frozen=True)
class ExperimentConfig:
    source: object  # SynthSpec | DataFileSpec
    model_kind: str = "random_forest"
    forest_params: ForestParams = ForestParams()
    logistic_params: LogisticParams = LogisticParams()
    split: SplitSpec = SplitSpec()
    eps_grid: tuple = DEFAULT_EPSILON_GRID
    scenarios: tuple = ALL_SCENARIOS
    aggregation_mode: str = "per_repeat"
    dispersion: str = "sd"
    output: str | None = None

    def __post_init__(self):
        if self.model_kind not in ("random_forest", "logistic"):
            raise ConfigError(f"model.kind: unknown kind {self.model_kind!r}")
        if not self.eps_grid:
            raise ConfigError("eps.grid: must not be empty")
        for e in self.eps_grid:
            if not (0.0 < e < 1.0):
                raise ConfigError(f"eps.grid: significance {e} outside (0, 1)")
        for s in self.scenarios:
            if s not in ALL_SCENARIOS:
                raise ConfigError(f"scenarios: unknown scenario {s!r}")
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise ConfigError(f"aggregation.mode: unknown mode {self.aggregation_mode!r}")
        if self.dispersion not in ("sd", "se"):
            raise ConfigError(f"report.dispersion: must be 'sd' or 'se'")

    @property
    def master_seed(self):
        return self.split.master_seed


@dataclass(frozen=True)
class AggregateStat:
    """Distribution summary of one statistic over repeats/trials.

    sd is the sample standard deviation (n-1 denominator); se = sd/sqrt(n).
    With n <= 1 both are None (undefined), never 0 by fiat.
    """

    mean: float | None
    median: float | None
    sd: float | None
    se: float | None
    n: int


def aggregate(values):
    """Summarize a sequence of statistic values; None entries (undefined
    metrics) are excluded and n reflects only the defined ones."""
    kept = [v for v in values if v is not None]
    n = len(kept)
    if n == 0:
        return AggregateStat(None, None, None, None, 0)
    mean = statistics.fmean(kept)
    median = float(np.median(kept))
    if n == 1:
        return AggregateStat(mean, median, None, None, 1)
    sd = statistics.stdev(kept)
    return AggregateStat(mean, median, sd, sd / n ** 0.5, n)


def load_source(cfg):
    src = cfg.source
    if isinstance(src, DataFileSpec):
        return load_dataset(src.path, src.label_column)
    if isinstance(src, SynthSpec):
        seed = derive_seed(cfg.master_seed, [("synth", 0)])
        return generate_synthetic(src.n, src.dim, src.balance, src.separation, seed)
    raise ConfigError(f"unknown data source {src!r}")


def model_label(cfg):
    if cfg.model_kind == "random_forest":
        p = cfg.forest_params
        k = p.features_per_split
        return (
            f"random_forest(trees={p.n_trees},depth={p.max_depth},"
            f"min_leaf={p.min_leaf},"
            f"features_per_split={'auto' if k is None else k},"
            f"seed=derive_seed({cfg.master_seed},('model',repeat)))"
        )
    p = cfg.logistic_params
    return (
        f"logistic(l2={p.l2},learning_rate={p.learning_rate},"
        f"iterations={p.iterations})"
    )


def _eps_key(eps):
    return f"{eps:g}"


def _scenario_record(confusion, n, name, dominant):
    kept, bc = scenario_reduction(confusion, ScenarioPolicy(name), dominant)
    record = {"kept": kept, "kept_fraction": kept / n}
    try:
        triple = binary_metrics(bc)
        record.update(_triple_record(triple))
    except MetricUndefined as exc:
        # legitimately undefined on this subset; recorded loudly, not as 0
        record.update(
            {"sensitivity": None, "specificity": None, "ccr": None,
             "undefined": str(exc)}
        )
    return record


def _evaluate_mcp(truths, p_pos, p_neg, cfg, dominant):
    """Per-epsilon confusion, scenario metrics and set rates."""
    out = {}
    for eps_val in cfg.eps_grid:
        eps = Epsilon(eps_val)
        sets = prediction_sets_batch(p_pos, p_neg, eps)
        conf = tally(truths, sets)
        rates = set_rates(truths, sets)
        out[_eps_key(eps_val)] = {
            "confusion": conf.as_dict(),
            "scenarios": {
                name: _scenario_record(conf, conf.total, name, dominant)
                for name in cfg.scenarios
            },
            "set_rates": {
                "both_rate": rates.both_rate,
                "empty_rate": rates.empty_rate,
                "singleton_rate": rates.singleton_rate,
                "error_rate_positive": rates.error_rate_positive,
                "error_rate_negative": rates.error_rate_negative,
            },
        }
    return out


def _triple_record(triple):
    return {
        "sensitivity": triple.sensitivity,
        "specificity": triple.specificity,
        "ccr": triple.ccr,
    }


def _run_one_repeat(ds, cfg, i):
    train, test = split_train_test(ds, cfg.split, i)
    model_seed = derive_seed(cfg.master_seed, [("model", i)])
    forest = ForestParams(
        n_trees=cfg.forest_params.n_trees,
        max_depth=cfg.forest_params.max_depth,
        min_leaf=cfg.forest_params.min_leaf,
        features_per_split=cfg.forest_params.features_per_split,
        seed=model_seed,
    )

    # point-classifier path: train on the full training set
    qsar_model = train_model(train, cfg.model_kind, forest, cfg.logistic_params)
    qsar_proba = np.atleast_1d(qsar_model.predict_proba(test.X))
    qsar_labels = np.where(qsar_proba > 0.5, POSITIVE, NEGATIVE)
    qsar_triple = point_metrics(test.y, qsar_labels)

    # conformal path: proper/calibration split done once (resample 0)
    proper, calib = split_proper_calibration(train, cfg.split, 0)
    mcp_model = train_model(proper, cfg.model_kind, forest, cfg.logistic_params)
    table = build_calibration(mcp_model, calib)
    mcp_proba = np.atleast_1d(mcp_model.predict_proba(test.X))
    p_pos, p_neg = p_values_batch(table, mcp_proba)
    dominant = train.majority_label()

    record = {
        "repeat": i,
        "model_seed": model_seed,
        "dominant_class": "positive" if dominant == POSITIVE else "negative",
        "sizes": {
            "train": train.n,
            "test": test.n,
            "proper": proper.n,
            "calibration": calib.n,
        },
        "qsar": _triple_record(qsar_triple),
        "mcp": _evaluate_mcp(test.y, p_pos, p_neg, cfg, dominant),
    }
    instance_rows = [
        {
            "repeat": i,
            "id": test.ids[j],
            "truth": int(test.y[j]),
            "proba_pos": float(mcp_proba[j]),
            "qsar_proba_pos": float(qsar_proba[j]),
            "p_pos": float(p_pos[j]),
            "p_neg": float(p_neg[j]),
        }
        for j in range(test.n)
    ]
    return record, instance_rows


def _collect(records, path):
    out = []
    for rec in records:
        cur = rec
        for key in path:
            cur = cur.get(key) if isinstance(cur, dict) else None
            if cur is None:
                break
        out.append(cur)
    return out


def _aggregate_records(records, cfg):
    agg = {
        "qsar": {
            m: aggregate(_collect(records, ("qsar", m)))
            for m in ("sensitivity", "specificity", "ccr")
        },
        "mcp": {},
    }
    for eps_val in cfg.eps_grid:
        key = _eps_key(eps_val)
        agg["mcp"][key] = {
            "scenarios": {
                name: {
                    m: aggregate(_collect(records, ("mcp", key, "scenarios", name, m)))
                    for m in ("sensitivity", "specificity", "ccr", "kept_fraction")
                }
                for name in cfg.scenarios
            },
            "set_rates": {
                m: aggregate(_collect(records, ("mcp", key, "set_rates", m)))
                for m in (
                    "both_rate",
                    "empty_rate",
                    "singleton_rate",
                    "error_rate_positive",
                    "error_rate_negative",
                )
            },
        }
    return agg


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    model_label: str
    repeats: list
    aggregates: dict
    instance_rows: list  # per-(repeat, test instance) raw outputs; not in JSON
    median_summary: dict | None = None


def run_repeated_split(cfg, workers=1):
    """Run the full repeated-split comparison.

    workers > 1 executes repeats concurrently; results are merged in repeat
    order and are byte-identical to the sequential run (seeds derive from
    indices, never from schedule). A failing repeat aborts the whole run.
    """
    ds = load_source(cfg)
    indices = range(cfg.split.repeats)

    def run(i):
        try:
            return _run_one_repeat(ds, cfg, i)
        except Exception as exc:  # noqa: BLE001 - context added, then re-raised
            raise RepeatFailed(i, exc) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, indices))
    else:
        results = [run(i) for i in indices]

    records = [rec for rec, _ in results]
    instance_rows = [row for _, rows in results for row in rows]
    result = ExperimentResult(
        config=cfg,
        model_label=model_label(cfg),
        repeats=records,
        aggregates=_aggregate_records(records, cfg),
        instance_rows=instance_rows,
    )
    if cfg.aggregation_mode == "per_compound_median":
        result.median_summary = per_compound_median(instance_rows, ds, cfg)
    return result


def per_compound_median(instance_rows, ds, cfg):
    """Medianize per-instance outputs, then compute metrics once.

    For each instance the median is taken over the repeats in which it fell
    into the test set (each instance is tested in roughly test_fraction of
    repeats, not all of them). Even counts use the mean-of-middle-two
    median. The medianized probabilities / p-values need not correspond to
    any single trained model.
    """
    by_id = {}
    for row in instance_rows:
        by_id.setdefault(row["id"], []).append(row)
    missing = [i for i in ds.ids if i not in by_id]
    if missing:
        raise InstanceNeverTested(
            f"{len(missing)} instances never appeared in a test set "
            f"(first: {missing[0]!r}); increase repeats"
        )

    truths = ds.y
    med_qsar = np.array(
        [np.median([r["qsar_proba_pos"] for r in by_id[i]]) for i in ds.ids]
    )
    med_p_pos = np.array([np.median([r["p_pos"] for r in by_id[i]]) for i in ds.ids])
    med_p_neg = np.array([np.median([r["p_neg"] for r in by_id[i]]) for i in ds.ids])

    qsar_labels = np.where(med_qsar > 0.5, POSITIVE, NEGATIVE)
    dominant = ds.majority_label()
    return {
        "tested_counts": {
            "min": min(len(v) for v in by_id.values()),
            "max": max(len(v) for v in by_id.values()),
        },
        "qsar": _triple_record(point_metrics(truths, qsar_labels)),
        "mcp": _evaluate_mcp(truths, med_p_pos, med_p_neg, cfg, dominant),
    }


@dataclass
class VariabilityResult:
    kind: str  # "seed" | "calibration"
    model_label: str
    n_trials: int
    trials: list
    aggregates: dict
    flip_count: int | None = None
    max_proba_spread: float | None = None
    proba_matrix: np.ndarray | None = None  # seed study only; not serialized


def run_seed_variability(cfg, n_seeds):
    """Retrain the point model with n_seeds distinct seeds on one fixed
    train/test partition; report per-seed metrics, label flips and spread."""
    if n_seeds < 2:
        raise ConfigError("seed variability needs --count >= 2")
    ds = load_source(cfg)
    train, test = split_train_test(ds, cfg.split, 0)

    probas = np.empty((n_seeds, test.n))
    trials = []
    for j in range(n_seeds):
        seed = derive_seed(cfg.master_seed, [("seed_study", j)])
        forest = ForestParams(
            n_trees=cfg.forest_params.n_trees,
            max_depth=cfg.forest_params.max_depth,
            min_leaf=cfg.forest_params.min_leaf,
            features_per_split=cfg.forest_params.features_per_split,
            seed=seed,
        )
        model = train_model(train, cfg.model_kind, forest, cfg.logistic_params)
        probas[j] = np.atleast_1d(model.predict_proba(test.X))
        triple = point_metrics(test.y, np.where(probas[j] > 0.5, POSITIVE, NEGATIVE))
        trials.append({"trial": j, "model_seed": seed, **_triple_record(triple)})

    labels = probas > 0.5
    flips = int(np.count_nonzero(labels.any(axis=0) & ~labels.all(axis=0)))
    spread = float(np.max(probas.max(axis=0) - probas.min(axis=0)))
    aggregates = {
        m: aggregate([t[m] for t in trials])
        for m in ("sensitivity", "specificity", "ccr")
    }
    return VariabilityResult(
        kind="seed",
        model_label=model_label(cfg),
        n_trials=n_seeds,
        trials=trials,
        aggregates=aggregates,
        flip_count=flips,
        max_proba_spread=spread,
        proba_matrix=probas,
    )


def run_calibration_variability(cfg, n_resamples):
    """Resample the proper/calibration split n_resamples times on one fixed
    train/test split and model seed; report dispersion of every MCP metric."""
    if n_resamples < 2:
        raise ConfigError("calibration variability needs --count >= 2")
    ds = load_source(cfg)
    train, test = split_train_test(ds, cfg.split, 0)
    model_seed = derive_seed(cfg.master_seed, [("model", 0)])
    forest = ForestParams(
        n_trees=cfg.forest_params.n_trees,
        max_depth=cfg.forest_params.max_depth,
        min_leaf=cfg.forest_params.min_leaf,
        features_per_split=cfg.forest_params.features_per_split,
        seed=model_seed,
    )

    trials = []
    for r in range(n_resamples):
        proper, calib = split_proper_calibration(train, cfg.split, r)
        model = train_model(proper, cfg.model_kind, forest, cfg.logistic_params)
        table = build_calibration(model, calib)
        proba = np.atleast_1d(model.predict_proba(test.X))
        p_pos, p_neg = p_values_batch(table, proba)
        trials.append(
            {
                "trial": r,
                "mcp": _evaluate_mcp(test.y, p_pos, p_neg, cfg, train.majority_label()),
            }
        )

    aggregates = {}
    for eps_val in cfg.eps_grid:
        key = _eps_key(eps_val)
        aggregates[key] = {
            "scenarios": {
                name: {
                    m: aggregate(_collect(trials, ("mcp", key, "scenarios", name, m)))
                    for m in ("sensitivity", "specificity", "ccr", "kept_fraction")
                }
                for name in cfg.scenarios
            },
            "set_rates": {
                m: aggregate(_collect(trials, ("mcp", key, "set_rates", m)))
                for m in (
                    "both_rate",
                    "empty_rate",
                    "singleton_rate",
                    "error_rate_positive",
                    "error_rate_negative",
                )
            },
        }
    return VariabilityResult(
        kind="calibration",
        model_label=model_label(cfg),
        n_trials=n_resamples,
        trials=trials,
        aggregates=aggregates,
    )

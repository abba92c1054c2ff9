"""Report emission: canonical JSON, CSV projections, aligned text tables.

Two hard rules are enforced here rather than merely documented:
every dispersion value is serialized through :func:`stat_payload`, which
refuses to emit a +/- without its statistic kind and sample size; and every
report that contains _incl metrics carries the caveat that they count
'both' prediction sets as correct.
"""

import csv
import json
import os
import tempfile

from . import __version__
from .data import NEGATIVE, POSITIVE, parse_label
from .errors import ConfigError, ReportLabelError
from .metrics import (
    ALL_SCENARIOS,
    McpConfusion,
    MetricUndefined,
    ScenarioPolicy,
    binary_metrics,
    scenario_reduction,
    set_rates,
    tally,
)
from .conformal import PredictionSet
from .protocol import AggregateStat, DataFileSpec, SynthSpec

P_VALUE_CONVENTION = (
    "non-smoothed: p = (#{calibration scores >= candidate score} + 1) / (n_class + 1); "
    "ties count toward the numerator; a class enters the prediction set iff "
    "p > significance (strict)"
)
SD_DEFINITION = "sample standard deviation (n-1 denominator); se = sd/sqrt(n)"
MEDIAN_INTERPRETATION = (
    "per-instance medians are taken over the repeats in which the instance fell "
    "into the test set (each instance is tested in roughly test_fraction of the "
    "repeats, not in all of them); final metrics are computed once from the "
    "medianized probabilities / p-values"
)
INCL_CAVEAT = (
    "_incl metrics count 'both' prediction sets as correct; they assume the true "
    "label of every 'both' prediction is covered and cannot decrease as 'both' "
    "predictions grow"
)
EMPTY_NOTE = (
    "'empty' prediction sets count as errors in per-class validity accounting "
    "and in every metric family except the empty_removed_* scenarios"
)


def stat_payload(stat, dispersion_label):
    """Serialize an AggregateStat; the only path a dispersion may take into
    any output. Refuses to emit without a statistic kind and sample size."""
    if dispersion_label not in ("sd", "se"):
        raise ReportLabelError(f"dispersion label must be 'sd' or 'se', got {dispersion_label!r}")
    if not isinstance(stat, AggregateStat):
        raise ReportLabelError("dispersion values must come from an AggregateStat")
    if stat.n is None or not isinstance(stat.n, int):
        raise ReportLabelError("an AggregateStat without n cannot be serialized")
    return {
        "value": stat.mean,
        "median": stat.median,
        "dispersion": stat.sd if dispersion_label == "sd" else stat.se,
        "dispersion_label": dispersion_label,
        "n": stat.n,
    }


def _serialize_aggregates(node, label):
    if isinstance(node, AggregateStat):
        return stat_payload(node, label)
    if isinstance(node, dict):
        return {k: _serialize_aggregates(v, label) for k, v in node.items()}
    raise ReportLabelError(f"unexpected aggregate node {node!r}")


def _config_echo(cfg):
    src = cfg.source
    if isinstance(src, SynthSpec):
        source = {
            "synth.n": src.n,
            "synth.dim": src.dim,
            "synth.balance": src.balance,
            "synth.separation": src.separation,
        }
    else:
        source = {"data.path": src.path, "data.label_column": src.label_column}
    echo = dict(source)
    echo.update(
        {
            "model.kind": cfg.model_kind,
            "model.trees": cfg.forest_params.n_trees,
            "model.depth": cfg.forest_params.max_depth,
            "model.min_leaf": cfg.forest_params.min_leaf,
            "model.features_per_split": cfg.forest_params.features_per_split,
            "model.l2": cfg.logistic_params.l2,
            "model.learning_rate": cfg.logistic_params.learning_rate,
            "model.iterations": cfg.logistic_params.iterations,
            "split.test_fraction": cfg.split.test_fraction,
            "split.calibration_fraction": cfg.split.calibration_fraction,
            "split.stratified": cfg.split.stratified,
            "split.repeats": cfg.split.repeats,
            "eps.grid": list(cfg.eps_grid),
            "scenarios": list(cfg.scenarios),
            "aggregation.mode": cfg.aggregation_mode,
            "report.dispersion": cfg.dispersion,
            "seed": cfg.master_seed,
        }
    )
    return echo


def build_report(result):
    """Assemble the canonical report document (no timestamps; re-running the
    same config must produce byte-identical JSON)."""
    cfg = result.config
    caveats = [EMPTY_NOTE]
    if "incl" in cfg.scenarios:
        caveats.insert(0, INCL_CAVEAT)
    metadata = {
        "tool": "cpeval",
        "version": __version__,
        "model": result.model_label,
        "seed": cfg.master_seed,
        "p_value_convention": P_VALUE_CONVENTION,
        "sd_definition": SD_DEFINITION,
        "aggregation_mode": cfg.aggregation_mode,
        "caveats": caveats,
        "config": _config_echo(cfg),
    }
    if cfg.aggregation_mode == "per_compound_median":
        metadata["aggregation_interpretation"] = MEDIAN_INTERPRETATION
    doc = {
        "metadata": metadata,
        "repeats": result.repeats,
        "aggregates": _serialize_aggregates(result.aggregates, cfg.dispersion),
    }
    if result.median_summary is not None:
        doc["median_summary"] = result.median_summary
    return doc


def build_variability_report(result, dispersion):
    return {
        "metadata": {
            "tool": "cpeval",
            "version": __version__,
            "kind": result.kind,
            "model": result.model_label,
            "n_trials": result.n_trials,
            "p_value_convention": P_VALUE_CONVENTION,
            "sd_definition": SD_DEFINITION,
        },
        "trials": result.trials,
        "aggregates": _serialize_aggregates(result.aggregates, dispersion),
        "flip_count": result.flip_count,
        "max_proba_spread": result.max_proba_spread,
    }


def to_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def atomic_write_text(path, text):
    """Write via temp file + rename so a crashed run never leaves a torn file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cpeval-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- text rendering -------------------------------------------------------

def _fmt_stat(payload):
    if payload["value"] is None:
        return "undefined (n=0)"
    value = f"{payload['value']:.4f}"
    if payload["dispersion"] is None:
        return f"{value} (n={payload['n']}, {payload['dispersion_label']} undefined)"
    return (
        f"{value} ± {payload['dispersion']:.4f} "
        f"({payload['dispersion_label']}, n={payload['n']})"
    )


def render_summary(report):
    """Aligned text table: one row per epsilon x scenario."""
    meta = report["metadata"]
    agg = report["aggregates"]
    lines = [
        f"model: {meta['model']}",
        f"seed: {meta['seed']}  aggregation: {meta['aggregation_mode']}",
    ]
    qsar = agg.get("qsar")
    if qsar:
        lines.append("")
        lines.append("point classifier (one label per instance):")
        for m in ("sensitivity", "specificity", "ccr"):
            lines.append(f"  {m:<12} {_fmt_stat(qsar[m])}")
    rows = []
    for eps_key in sorted(agg["mcp"], key=float, reverse=True):
        eps_node = agg["mcp"][eps_key]
        for name, stats in eps_node["scenarios"].items():
            rows.append(
                [
                    eps_key,
                    f"{(1 - float(eps_key)) * 100:.0f}%",
                    name,
                    _fmt_stat(stats["sensitivity"]),
                    _fmt_stat(stats["specificity"]),
                    _fmt_stat(stats["ccr"]),
                    _fmt_stat(stats["kept_fraction"]),
                ]
            )
    header = ["eps", "conf", "scenario", "sensitivity", "specificity", "ccr", "kept_fraction"]
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines.append("")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
    for caveat in meta.get("caveats", []):
        lines.append("")
        lines.append(f"note: {caveat}")
    return "\n".join(lines) + "\n"


# -- CSV projections ------------------------------------------------------

def _set_column(eps_key):
    return f"set@{eps_key}"


def write_predictions_csv(path, result):
    """Per-(repeat, test instance) dump: id, true label, probability,
    p-values, and one prediction-set column per epsilon."""
    from .conformal import Epsilon, prediction_set, PValuePair

    eps_keys = [f"{e:g}" for e in result.config.eps_grid]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["repeat", "id", "true_label", "proba_pos", "p_pos", "p_neg"]
            + [_set_column(k) for k in eps_keys]
        )
        for row in result.instance_rows:
            p = PValuePair(row["p_pos"], row["p_neg"])
            sets = [prediction_set(p, Epsilon(float(k))).value for k in eps_keys]
            writer.writerow(
                [
                    row["repeat"],
                    row["id"],
                    row["truth"],
                    repr(row["proba_pos"]),
                    repr(row["p_pos"]),
                    repr(row["p_neg"]),
                ]
                + sets
            )


def write_metrics_csv(path, report):
    """One row per (epsilon, scenario), dispersion columns labeled."""
    agg = report["aggregates"]
    fields = ("sensitivity", "specificity", "ccr", "kept_fraction")
    rate_fields = ("both_rate", "empty_rate")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["epsilon", "scenario"]
        for f in fields + rate_fields:
            header += [f"{f}_mean", f"{f}_dispersion"]
        header += ["dispersion_label", "n"]
        writer.writerow(header)
        for eps_key in sorted(agg["mcp"], key=float, reverse=True):
            node = agg["mcp"][eps_key]
            for name, stats in node["scenarios"].items():
                row = [eps_key, name]
                label, n = None, None
                for f in fields:
                    p = stats[f]
                    row += [p["value"], p["dispersion"]]
                    label, n = p["dispersion_label"], p["n"]
                for f in rate_fields:
                    p = node["set_rates"][f]
                    row += [p["value"], p["dispersion"]]
                writer.writerow(row + [label, n])


def write_trials_csv(path, result):
    """Per-trial CSV for the variability studies."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if result.kind == "seed":
            writer.writerow(["trial", "model_seed", "sensitivity", "specificity", "ccr"])
            for t in result.trials:
                writer.writerow(
                    [t["trial"], t["model_seed"], t["sensitivity"], t["specificity"], t["ccr"]]
                )
        else:
            writer.writerow(
                ["trial", "epsilon", "scenario", "kept_fraction",
                 "sensitivity", "specificity", "ccr"]
            )
            for t in result.trials:
                for eps_key, node in t["mcp"].items():
                    for name, stats in node["scenarios"].items():
                        writer.writerow(
                            [t["trial"], eps_key, name, stats["kept_fraction"],
                             stats["sensitivity"], stats["specificity"], stats["ccr"]]
                        )


# -- predictions-dump analysis (cmd_metrics) ------------------------------

_SET_BY_NAME = {s.value: s for s in PredictionSet}


def read_predictions_csv(path):
    """Parse a predictions dump into truths and per-epsilon prediction sets.

    Requires a true_label column and at least one set@<eps> column; other
    columns are ignored. Errors name the offending data row (0-indexed).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} has no header row")
        if "true_label" not in header:
            raise ConfigError(f"{path} is missing the true_label column")
        truth_pos = header.index("true_label")
        set_cols = [(j, h[len("set@"):]) for j, h in enumerate(header) if h.startswith("set@")]
        if not set_cols:
            raise ConfigError(f"{path} has no set@<eps> columns")

        truths = []
        sets = {eps_key: [] for _, eps_key in set_cols}
        for r, row in enumerate(reader):
            truth = parse_label(row[truth_pos]) if truth_pos < len(row) else None
            # also accept the words used in the dump itself
            if truth is None and truth_pos < len(row):
                word = row[truth_pos].strip().lower()
                truth = {"positive": POSITIVE, "negative": NEGATIVE}.get(word)
            if truth is None:
                raise ConfigError(f"{path}: bad true_label at data row {r}")
            truths.append(truth)
            for j, eps_key in set_cols:
                try:
                    sets[eps_key].append(_SET_BY_NAME[row[j].strip().lower()])
                except (KeyError, IndexError):
                    raise ConfigError(f"{path}: bad prediction set at data row {r}")
    if not truths:
        raise ConfigError(f"{path} contains no data rows")
    return truths, sets


def metrics_from_predictions(path):
    """Recompute the confusion table, all three metric families and every
    scenario for each epsilon column of a predictions dump.

    The dominant class for the dominant-class scenario is the majority of
    the true labels in the dump (tie resolves to positive), since the dump
    does not carry the training set.
    """
    truths, sets_by_eps = read_predictions_csv(path)
    n_pos = sum(1 for t in truths if t == POSITIVE)
    dominant = POSITIVE if n_pos >= len(truths) - n_pos else NEGATIVE
    out = {}
    for eps_key, sets in sets_by_eps.items():
        conf = tally(truths, sets)
        node = {"confusion": conf.as_dict(), "scenarios": {}}
        for name in ALL_SCENARIOS:
            kept, bc = scenario_reduction(conf, ScenarioPolicy(name), dominant)
            rec = {"kept": kept, "kept_fraction": kept / conf.total}
            try:
                triple = binary_metrics(bc)
                rec.update(
                    {
                        "sensitivity": triple.sensitivity,
                        "specificity": triple.specificity,
                        "ccr": triple.ccr,
                    }
                )
            except MetricUndefined as exc:
                rec.update(
                    {"sensitivity": None, "specificity": None, "ccr": None,
                     "undefined": str(exc)}
                )
            node["scenarios"][name] = rec
        rates = set_rates(truths, sets)
        node["set_rates"] = {
            "both_rate": rates.both_rate,
            "empty_rate": rates.empty_rate,
            "singleton_rate": rates.singleton_rate,
            "error_rate_positive": rates.error_rate_positive,
            "error_rate_negative": rates.error_rate_negative,
        }
        out[eps_key] = node
    return out


def render_confusion_table(conf):
    """Print-friendly layout of the 8-cell table (rows = actual class)."""
    c = McpConfusion(**conf) if isinstance(conf, dict) else conf
    header = ["actual \\ set", "positive", "negative", "both", "empty", "total"]
    rows = [
        ["positive", c.tp, c.fn, c.bp, c.ep, c.total_p],
        ["negative", c.fp, c.tn, c.bn, c.en, c.total_n],
    ]
    widths = [max(len(str(x)) for x in [h] + [r[i] for r in rows]) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    for r in rows:
        lines.append("  ".join(str(x).ljust(w) for x, w in zip(r, widths)))
    return "\n".join(lines)

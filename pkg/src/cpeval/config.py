"""Flat ``key = value`` experiment config files.

Lines starting with '#' (or blank) are ignored. Unknown keys are an error:
a silently ignored typo would change the experiment without anyone noticing.
"""

from .classifiers import ForestParams, LogisticParams
from .conformal import DEFAULT_EPSILON_GRID
from .data import SplitSpec
from .errors import ConfigError
from .metrics import ALL_SCENARIOS
from .protocol import (
    AGGREGATION_MODES,
    DataFileSpec,
    ExperimentConfig,
    SynthSpec,
)

_KNOWN_KEYS = {
    "data.path", "data.label_column",
    "synth.n", "synth.dim", "synth.balance", "synth.separation",
    "model.kind", "model.trees", "model.depth", "model.min_leaf",
    "model.features_per_split", "model.l2", "model.learning_rate",
    "model.iterations",
    "split.test_fraction", "split.calibration_fraction", "split.repeats",
    "split.stratified",
    "eps.grid", "scenarios", "aggregation.mode", "report.dispersion",
    "seed", "output",
}


def _parse_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key: {key}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate config key: {key}")
        pairs[key] = value
    return pairs


def _get(pairs, key, convert, default=None):
    if key not in pairs:
        return default
    try:
        return convert(pairs[key])
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _bool(value):
    low = value.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {value!r}")


def _float_list(value):
    items = [p.strip() for p in value.split(",") if p.strip()]
    return tuple(float(p) for p in items)


def _str_list(value):
    return tuple(p.strip() for p in value.split(",") if p.strip())


def parse_config(text):
    """Parse config text into an ExperimentConfig; error messages name the
    offending key."""
    pairs = _parse_pairs(text)

    has_path = "data.path" in pairs
    has_synth = any(k.startswith("synth.") for k in pairs)
    if has_path and has_synth:
        raise ConfigError("specify either data.path or synth.*, not both")
    if has_path:
        source = DataFileSpec(
            path=pairs["data.path"],
            label_column=_get(pairs, "data.label_column", str, "label"),
        )
    elif has_synth:
        for required in ("synth.n", "synth.dim"):
            if required not in pairs:
                raise ConfigError(f"{required}: required for synthetic data")
        source = SynthSpec(
            n=_get(pairs, "synth.n", int),
            dim=_get(pairs, "synth.dim", int),
            balance=_get(pairs, "synth.balance", float, 0.5),
            separation=_get(pairs, "synth.separation", float, 1.0),
        )
    else:
        raise ConfigError("config must specify data.path or synth.n/synth.dim")

    kind = _get(pairs, "model.kind", str, "random_forest")
    if kind not in ("random_forest", "logistic"):
        raise ConfigError(f"model.kind: unknown kind {kind!r}")

    try:
        forest = ForestParams(
            n_trees=_get(pairs, "model.trees", int, 300),
            max_depth=_get(pairs, "model.depth", int, 20),
            min_leaf=_get(pairs, "model.min_leaf", int, 1),
            features_per_split=_get(pairs, "model.features_per_split", int, None),
        )
        logistic = LogisticParams(
            l2=_get(pairs, "model.l2", float, 1e-3),
            learning_rate=_get(pairs, "model.learning_rate", float, 0.1),
            iterations=_get(pairs, "model.iterations", int, 500),
        )
        split = SplitSpec(
            test_fraction=_get(pairs, "split.test_fraction", float, 0.2),
            calibration_fraction=_get(pairs, "split.calibration_fraction", float, 0.3),
            stratified=_get(pairs, "split.stratified", _bool, True),
            repeats=_get(pairs, "split.repeats", int, 100),
            master_seed=_get(pairs, "seed", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    eps_grid = _get(pairs, "eps.grid", _float_list, DEFAULT_EPSILON_GRID)
    for e in eps_grid:
        if not (0.0 < e < 1.0):
            raise ConfigError(f"eps.grid: significance {e} outside (0, 1)")

    scenarios = _get(pairs, "scenarios", _str_list, ALL_SCENARIOS)
    for s in scenarios:
        if s not in ALL_SCENARIOS:
            raise ConfigError(
                f"scenarios: unknown scenario {s!r} (known: {', '.join(ALL_SCENARIOS)})"
            )

    mode = _get(pairs, "aggregation.mode", str, "per_repeat")
    if mode not in AGGREGATION_MODES:
        raise ConfigError(f"aggregation.mode: unknown mode {mode!r}")
    dispersion = _get(pairs, "report.dispersion", str, "sd")
    if dispersion not in ("sd", "se"):
        raise ConfigError("report.dispersion: must be 'sd' or 'se'")

    return ExperimentConfig(
        source=source,
        model_kind=kind,
        forest_params=forest,
        logistic_params=logistic,
        split=split,
        eps_grid=eps_grid,
        scenarios=scenarios,
        aggregation_mode=mode,
        dispersion=dispersion,
        output=pairs.get("output"),
    )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

"""Mondrian conformal prediction for binary classifiers, with prediction-set
metrics, 'both'/'empty' handling scenarios, and variability studies."""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    Dataset,
    LabeledInstance,
    NEGATIVE,
    POSITIVE,
    SplitSpec,
    generate_synthetic,
    load_dataset,
    split_proper_calibration,
    split_train_test,
)
from .seeding import derive_seed  # noqa: F401
from .classifiers import (  # noqa: F401
    ForestParams,
    LogisticParams,
    predict_label,
    predict_proba,
    train_logistic,
    train_random_forest,
)
from .conformal import (  # noqa: F401
    CalibrationTable,
    DEFAULT_EPSILON_GRID,
    Epsilon,
    PredictionSet,
    PValuePair,
    build_calibration,
    nonconformity,
    p_values,
    prediction_set,
)
from .metrics import (  # noqa: F401
    McpConfusion,
    MetricTriple,
    ScenarioPolicy,
    apply_scenario,
    metrics_excl,
    metrics_incl,
    metrics_uncertain_out,
    point_metrics,
    set_rates,
    tally,
)
from .protocol import (  # noqa: F401
    AggregateStat,
    DataFileSpec,
    ExperimentConfig,
    SynthSpec,
    aggregate,
    per_compound_median,
    run_calibration_variability,
    run_repeated_split,
    run_seed_variability,
)

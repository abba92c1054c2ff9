"""Exception hierarchy shared across the package."""


class CpevalError(Exception):
    """Base class for all errors raised by this package."""


# -- dataset ingestion / generation ---------------------------------------

class MissingColumn(CpevalError):
    pass


class NonNumericFeature(CpevalError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"non-numeric feature value at data row {row}, column {column!r}")


class UnknownLabelValue(CpevalError):
    def __init__(self, row, value):
        self.row = row
        self.value = value
        super().__init__(f"unknown label value {value!r} at data row {row}")


class EmptyDataset(CpevalError):
    pass


class DegenerateRequest(CpevalError):
    pass


class InsufficientClassMembers(CpevalError):
    pass


# -- classifiers ----------------------------------------------------------

class SingleClassTraining(CpevalError):
    pass


class NonFiniteLoss(CpevalError):
    pass


class DimensionMismatch(CpevalError):
    pass


# -- conformal ------------------------------------------------------------

class EmptyClassCalibration(CpevalError):
    pass


# -- metrics --------------------------------------------------------------

class LengthMismatch(CpevalError):
    pass


class EmptyInput(CpevalError):
    pass


class MetricUndefined(CpevalError):
    """A metric denominator is zero; never silently reported as 0."""

    def __init__(self, denominator):
        self.denominator = denominator
        super().__init__(f"metric undefined: denominator {denominator} is zero")


# -- protocol / reporting -------------------------------------------------

class InstanceNeverTested(CpevalError):
    pass


class RepeatFailed(CpevalError):
    def __init__(self, repeat_index, cause):
        self.repeat_index = repeat_index
        self.cause = cause
        super().__init__(f"repeat {repeat_index} failed: {cause}")


class ConfigError(CpevalError):
    pass


class ReportLabelError(CpevalError):
    """A dispersion value was about to be emitted without a label or n."""

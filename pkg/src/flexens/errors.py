"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """A dataset, schedule, or file violated a structural invariant."""


class MalformedManifestError(ValidationError):
    """Manifest JSON is unreadable, misses keys, or declares invalid dimensions."""


class DatasetFormatError(ValidationError):
    """A binary payload file carries a bad magic string or unsupported version."""


class DimensionMismatchError(ValidationError):
    """Dimensions disagree between the manifest, file headers, or payload sizes."""


class NonFiniteLogitError(ValidationError):
    """A logit value is NaN or infinite."""

    def __init__(self, model: int, sample: int, class_index: int):
        self.model = model
        self.sample = sample
        self.class_index = class_index
        super().__init__(
            f"non-finite logit at model={model}, sample={sample}, class={class_index}"
        )


class LabelOutOfRangeError(ValidationError):
    """A label falls outside [0, num_classes)."""

    def __init__(self, sample: int, value: int, num_classes: int):
        self.sample = sample
        self.value = value
        self.num_classes = num_classes
        super().__init__(
            f"label {value} at sample={sample} is outside [0, {num_classes})"
        )


class NonPositiveCostError(ValidationError):
    """A per-model cost is zero, negative, or non-finite."""

    def __init__(self, model: int, value: float):
        self.model = model
        self.value = value
        super().__init__(f"cost {value!r} for model={model} must be finite and > 0")


class RaggedRowsError(ValidationError):
    """A CSV row has a different number of columns than the first row."""

    def __init__(self, path: str, row: int, expected: int, got: int):
        self.path = path
        self.row = row
        super().__init__(
            f"{path}: row {row} has {got} columns, expected {expected}"
        )


class CsvParseError(ValidationError):
    """A CSV cell could not be parsed as the expected numeric type."""

    def __init__(self, path: str, row: int, column: int, message: str):
        self.path = path
        self.row = row
        self.column = column
        super().__init__(f"{path}: row {row}, column {column}: {message}")


class MalformedScheduleError(ValidationError):
    """A threshold schedule JSON file is unreadable or structurally wrong."""


class InvalidConfigError(ValueError):
    """A generator configuration violates its invariants."""


class ScheduleMismatchError(ValueError):
    """A threshold schedule's length does not fit the ensemble size."""

    def __init__(self, num_thresholds: int, num_models: int):
        self.num_thresholds = num_thresholds
        self.num_models = num_models
        super().__init__(
            f"schedule has {num_thresholds} thresholds but an ensemble of "
            f"{num_models} models needs {num_models - 1}"
        )

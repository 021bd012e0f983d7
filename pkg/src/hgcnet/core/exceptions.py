"""Custom exceptions for the hgcnet package."""


class HgcError(Exception):
    """Base exception for all hgcnet errors."""

    pass


class ConfigurationError(HgcError):
    """Raised when a run configuration or network spec is invalid or missing."""

    pass


class ValidationError(HgcError):
    """Raised when an operation receives arguments that violate its contract."""

    pass


class ShapeError(ValidationError):
    """Raised when tensor ranks or dimensions do not line up."""

    pass


class DivisibilityError(ValidationError):
    """Raised when channel counts are not divisible by the group count."""

    pass


class StateError(HgcError):
    """Raised when a layer is in an invalid state for an operation."""

    pass


class DataFormatError(HgcError):
    """Raised when a dataset file does not match the expected binary layout."""

    pass


class CheckpointError(HgcError):
    """Raised when a checkpoint cannot be read or does not fit the model."""

    pass


class TrainingError(HgcError):
    """Raised when an optimization run has to be aborted."""

    pass


class DivergenceError(TrainingError):
    """Raised when the training loss stays far above its initial value."""

    pass

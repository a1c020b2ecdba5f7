"""Exception types shared across the package."""


class MtlError(Exception):
    """Base class for all mtltext errors."""


class ContractError(MtlError):
    """An operation was called in a way that violates its contract."""


class NumericError(MtlError):
    """A numeric operation produced NaN or Inf."""


class ConfigError(MtlError):
    """Invalid configuration (bad value, missing file, malformed config)."""


class DataError(MtlError):
    """Invalid example data (bad label, empty batch, ...)."""


class ParseError(DataError):
    """A dataset file could not be parsed; message names the offending line."""


class CheckpointError(MtlError):
    """A checkpoint file is malformed, truncated, or shape-incompatible."""


class MetricError(MtlError):
    """A metric is undefined for the given inputs (e.g. zero variance)."""


class TrainingDiverged(MtlError):
    """Training hit a non-finite loss. Carries the last finite checkpoint."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good

"""Exception types raised across the package.

Plain ``ValueError`` is used for argument/shape violations; the classes here
cover domain failures that callers may want to handle individually.
"""


class SentinelError(Exception):
    """Base class for all package-specific errors."""


class CsvFormatError(SentinelError):
    """A CSV row could not be parsed. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SeriesStructureError(SentinelError):
    """Timestamps are out of order, non-uniform, or inconsistent with values."""


class SchemaError(SentinelError):
    """A required feature is absent or a declared schema does not match the data."""


class ImputationError(SentinelError):
    """Imputation cannot proceed (e.g. a feature has no observed values)."""


class EncodingError(SentinelError):
    """A category was not present when the encoder was fitted."""


class FitError(SentinelError):
    """Model fitting failed."""


class DivergenceError(FitError):
    """Training loss became non-finite. Carries the epoch where it happened."""

    def __init__(self, epoch: int, message: str = ""):
        detail = message or "training loss is not finite"
        super().__init__(f"epoch {epoch}: {detail}")
        self.epoch = epoch


class BootstrapError(SentinelError):
    """Too many bootstrap repetitions failed to refit."""


class ConfigError(SentinelError):
    """An experiment configuration file is invalid."""

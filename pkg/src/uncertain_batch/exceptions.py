"""Exception hierarchy shared by every module in the package."""


class UncertainBatchError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(UncertainBatchError, ValueError):
    """Array shapes do not agree."""


class DomainError(UncertainBatchError, ValueError):
    """A scalar or array entry lies outside its admissible range."""


class PreconditionError(UncertainBatchError, RuntimeError):
    """An operation was called before its inputs were ready.

    Typical case: querying a sliding-window uncertainty before the window
    has been filled.
    """


class ParseError(UncertainBatchError, ValueError):
    """A dataset or config file is malformed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = str(path)
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ConfigError(UncertainBatchError, ValueError):
    """Invalid experiment configuration."""


class NumericError(UncertainBatchError, FloatingPointError):
    """Non-finite values appeared during training."""


class MetricUndefinedError(UncertainBatchError, ValueError):
    """No label or instance is eligible for the requested metric."""

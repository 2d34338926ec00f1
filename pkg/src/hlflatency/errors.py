"""Exception hierarchy shared by the numerics, fitting and simulator code."""


class HlfLatencyError(Exception):
    """Base class for all package errors."""


class ParameterError(HlfLatencyError, ValueError):
    """A distribution parameter (or special-function argument) is out of domain."""


class UndefinedMomentError(HlfLatencyError, ValueError):
    """The requested moment does not exist for the given parameters."""


class InputError(HlfLatencyError, ValueError):
    """Sample data is empty, too small, or contains invalid values."""


class FitError(HlfLatencyError):
    """Base class for fitting failures."""


class FitDegenerateError(FitError):
    """The sample admits no finite estimate (e.g. zero variance)."""


class FitFailedError(FitError):
    """The optimizer ran out of budget; ``best`` holds the best iterate seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(HlfLatencyError, ValueError):
    """Configuration file or object violates the schema or an invariant."""

    def __init__(self, message, field=None, line=None, column=None):
        location = []
        if field:
            location.append(field)
        if line is not None:
            location.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        super().__init__(f"{': '.join(location)}: {message}" if location else message)
        self.field = field
        self.line = line
        self.column = column

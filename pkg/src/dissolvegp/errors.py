"""Exception hierarchy shared across the package."""


class DissolveGpError(Exception):
    """Base class for all package-specific errors."""


class DataError(DissolveGpError, ValueError):
    """Invalid input data."""


class ParseError(DataError):
    """Malformed CSV input; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GridMismatchError(DataError):
    """Time grids differ where identical grids are required."""


class ValueRangeError(DataError):
    """Percent-dissolved value outside the accepted ingestion range."""


class InsufficientReplicationError(DataError):
    """Too few units (or time points) for the requested statistic."""


class NumericalError(DissolveGpError, RuntimeError):
    """Numerical failure in a linear-algebra or optimisation routine."""


class ConditioningError(NumericalError):
    """Factorisation failed even after jitter escalation.

    ``jitter_levels`` records the diagonal jitter values that were tried.
    """

    def __init__(self, message, jitter_levels=()):
        super().__init__(f"{message} (jitter levels tried: {list(jitter_levels)})")
        self.jitter_levels = tuple(jitter_levels)


class EstimationError(NumericalError):
    """No optimiser restart produced a finite objective value."""

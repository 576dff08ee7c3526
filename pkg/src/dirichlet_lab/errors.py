"""Exception types shared across the package."""


class CapacityError(ValueError):
    """A requested enumeration exceeds the configured size limits."""


class NumericalError(RuntimeError):
    """A numerical routine produced an unusable result."""


class InconclusiveError(RuntimeError):
    """A computation finished without enough evidence to certify its answer."""


class CheckFailed(RuntimeError):
    """A report-level consistency assertion failed."""

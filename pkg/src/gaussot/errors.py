"""Exception hierarchy shared by every gaussot module."""


class GaussotError(Exception):
    """Base class for all library errors."""


class DimensionError(GaussotError, ValueError):
    pass


class NormalizationError(GaussotError):
    pass


class QuadratureError(GaussotError):
    pass


class SolverError(GaussotError):
    """Raised when a transport solver cannot produce a map.

    ``trace`` carries solver-specific diagnostics (for Sinkhorn, the marginal
    error history per epsilon).
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class DomainError(GaussotError, ValueError):
    pass


class ConvexityError(GaussotError):
    pass


class UnsupportedBackendError(GaussotError):
    pass


class ConfigError(GaussotError):
    """Invalid scenario configuration. ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class PreconditionError(GaussotError, ValueError):
    """A parameter such as ``c`` or ``p`` is outside the range a statement needs."""

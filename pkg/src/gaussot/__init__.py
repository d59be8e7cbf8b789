"""Optimal transport laboratory for weighted Gaussian measures."""

__version__ = "0.1.0"

from . import errors, functionals, inequalities, matrix_lemmas, potentials, quadrature, transport, wiener_tower  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    ConvexityError,
    DimensionError,
    DomainError,
    GaussotError,
    NormalizationError,
    PreconditionError,
    QuadratureError,
    SolverError,
    UnsupportedBackendError,
)

__all__ = [
    "__version__",
    "errors",
    "functionals",
    "inequalities",
    "matrix_lemmas",
    "potentials",
    "quadrature",
    "transport",
    "wiener_tower",
    "ConfigError",
    "ConvexityError",
    "DimensionError",
    "DomainError",
    "GaussotError",
    "NormalizationError",
    "PreconditionError",
    "QuadratureError",
    "SolverError",
    "UnsupportedBackendError",
]

"""Optimal transport maps between weighted Gaussian measures.

Every map is written ``T(x) = x + grad phi(x)``; the Jacobian is ``I + hess phi``.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConvexityError, DimensionError, UnsupportedBackendError
from ..potentials import as_gaussian, from_literal, to_literal
from ..quadrature import integrate_weighted
from .base import Identity, Linear, Product, TransportMap, sym_sqrt
from .entropic import DEFAULT_SCHEDULE, EntropicGrid, solve_entropic_grid
from .quantile import Quantile1D, solve_quantile_1d

__all__ = [
    "TransportMap",
    "Identity",
    "Linear",
    "Product",
    "Quantile1D",
    "EntropicGrid",
    "DEFAULT_SCHEDULE",
    "solve_gaussian_closed_form",
    "solve_quantile_1d",
    "solve_entropic_grid",
    "solve_product",
    "map_value",
    "map_phi_grad",
    "map_jacobian",
    "map_third_derivative",
    "pushforward_check",
    "battery",
    "to_record",
    "from_record",
    "sym_sqrt",
]


def solve_gaussian_closed_form(V, W):
    """Closed-form Brenier map between two Gaussian measures.

    With ``e^{-V} gamma = N(m1, S1)`` and ``e^{-W} gamma = N(m2, S2)`` the map is
    ``x -> M x + (m2 - M m1)`` with
    ``M = S1^{-1/2} (S1^{1/2} S2 S1^{1/2})^{1/2} S1^{-1/2}``.

    Raises
    ------
    ConvexityError
        If either potential does not describe a nondegenerate Gaussian.
    """
    if V.dim != W.dim:
        raise DimensionError(f"source dim {V.dim} != target dim {W.dim}")
    g1, g2 = as_gaussian(V), as_gaussian(W)
    if g1 is None or g2 is None:
        raise ConvexityError("closed form needs quadratic potentials with positive definite covariance")
    (m1, S1), (m2, S2) = g1, g2
    if np.array_equal(m1, m2) and np.array_equal(S1, S2):
        return Identity(V.dim, V, W)
    r = sym_sqrt(S1)
    ri = sym_sqrt(S1, inverse=True)
    M = ri @ sym_sqrt(r @ S2 @ r) @ ri
    M = 0.5 * (M + M.T)
    return Linear(M, m2 - M @ m1, source=V, target=W)


def solve_product(V, W, solver="quantile", **kwargs):
    """Solve a separable pair coordinate by coordinate."""
    from ..potentials import Separable

    if not (isinstance(V, Separable) and isinstance(W, Separable)) or V.dim != W.dim:
        raise DimensionError("product solves need separable potentials of equal dimension")
    parts = []
    for v, w in zip(V.components, W.components):
        if solver == "quantile":
            parts.append(solve_quantile_1d(v, w, **kwargs))
        elif solver == "gaussian":
            parts.append(solve_gaussian_closed_form(v, w))
        else:
            raise ValueError(f"unknown component solver {solver!r}")
    return Product(parts, source=V, target=W)


def map_value(T, x, extrapolate=False):
    return T.value(x, extrapolate=extrapolate)


def map_phi_grad(T, x, extrapolate=False):
    return T.phi_grad(x, extrapolate=extrapolate)


def map_jacobian(T, x, extrapolate=False):
    return T.jacobian(x, extrapolate=extrapolate)


def map_third_derivative(T, x, a, extrapolate=False):
    return T.third_derivative(x, a, extrapolate=extrapolate)


def _battery_directions(dim):
    ones = np.ones(dim) / math.sqrt(dim)
    alt = np.array([(-1.0) ** i for i in range(dim)]) / math.sqrt(dim)
    first = np.zeros(dim)
    first[0] = 1.0
    return [0.5 * ones, 1.0 * alt, 1.5 * first]


def battery(dim):
    """Test functions ``1, x_i, x_i x_j, |x|^2, cos<u, x>`` as ``(name, f)`` pairs."""
    out = [("1", lambda y: np.ones(len(y)))]
    for i in range(dim):
        out.append((f"x{i}", lambda y, i=i: y[:, i]))
    for i in range(dim):
        for j in range(i, dim):
            out.append((f"x{i}x{j}", lambda y, i=i, j=j: y[:, i] * y[:, j]))
    out.append(("|x|^2", lambda y: np.einsum("ij,ij->i", y, y)))
    for k, u in enumerate(_battery_directions(dim)):
        out.append((f"cos{k}", lambda y, u=u: np.cos(y @ u)))
    return out


def pushforward_check(T, V, W, q, detail=False):
    """Max over the battery of ``|int f(T) e^{-V} dgamma - int f e^{-W} dgamma|``.

    Never raises on numerical trouble; a failed evaluation is reported as ``inf``.
    """
    worst = 0.0
    rows = {}
    try:
        mapped = T.value(q.nodes, extrapolate=True)
        for name, f in battery(q.dim):
            lhs = integrate_weighted(q, lambda _x: f(mapped), V)
            rhs = integrate_weighted(q, f, W)
            rows[name] = abs(lhs - rhs)
            worst = max(worst, rows[name])
    except Exception:  # noqa: BLE001 - diagnostics never raise
        worst = math.inf
    return (worst, rows) if detail else worst


def to_record(T) -> dict:
    """JSON-compatible description of a map, including its potentials."""
    rec = {"backend": T.backend, "dim": T.dim}
    for key in ("source", "target"):
        p = getattr(T, key)
        if p is not None:
            try:
                rec[key] = to_literal(p)
            except TypeError:
                pass
    if isinstance(T, Linear):
        rec.update(M=T.M.tolist(), m=T.m.tolist())
    elif isinstance(T, Quantile1D):
        rec.update(
            knots=T.knots.tolist(),
            values=T.values.tolist(),
            slopes=T.slopes.tolist(),
            log_norm_src=T.log_norm_src,
            log_norm_tgt=T.log_norm_tgt,
        )
    elif isinstance(T, EntropicGrid):
        rec.update(
            radius=T.radius,
            points=T.points,
            epsilon=T.epsilon,
            g=T.g.ravel().tolist(),
            log_b=T.log_b.ravel().tolist(),
            trace=T.trace,
        )
    elif isinstance(T, Product):
        rec["components"] = [to_record(c) for c in T.components]
    elif not isinstance(T, Identity):
        raise UnsupportedBackendError(f"cannot serialize backend {T.backend!r}")
    return rec


def from_record(rec: dict):
    backend = rec["backend"]
    V = from_literal(rec["source"]) if "source" in rec else None
    W = from_literal(rec["target"]) if "target" in rec else None
    dim = int(rec["dim"])
    if backend == "identity":
        return Identity(dim, V, W)
    if backend == "linear":
        return Linear(rec["M"], rec["m"], source=V, target=W)
    if backend == "quantile1d":
        return Quantile1D(rec["knots"], rec["values"], rec["slopes"], V, W,
                          rec["log_norm_src"], rec["log_norm_tgt"])
    if backend == "entropic":
        shape = (int(rec["points"]),) * dim
        return EntropicGrid(rec["radius"], rec["points"], rec["epsilon"],
                            np.reshape(rec["g"], shape), np.reshape(rec["log_b"], shape),
                            source=V, target=W, trace=rec.get("trace"))
    if backend == "product":
        return Product([from_record(c) for c in rec["components"]], source=V, target=W)
    raise UnsupportedBackendError(f"unknown backend {backend!r}")

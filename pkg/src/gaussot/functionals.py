"""Integral and pointwise functionals of potentials and transport maps.

Integral functionals return a :class:`FunctionalValue` whose error bar is
the difference between the rule used and the rule refined by 8 points per
axis. When a separable potential is paired with a one-dimensional rule, the
functional is evaluated coordinate by coordinate and summed, which is how
dimensions beyond the tensor-rule range are reached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvexityError, DimensionError, NormalizationError, UnsupportedBackendError
from .potentials import Separable, as_points
from .quadrature import integrate_weighted
from .transport import Identity, Product
from .transport.base import sym_sqrt

__all__ = [
    "FunctionalValue",
    "det2",
    "log_det2",
    "ou_apply",
    "fisher_information",
    "relative_entropy",
    "w2_cost_from_map",
    "hs_phi",
    "log_det2_map",
    "cross_hs",
    "nw_integral",
    "sandwich_integral",
    "hessian_energy",
    "ma_residual",
    "nw_term",
    "sandwich_term",
    "third_hs_sq",
    "lemma33_diagnostic",
]

SYMMETRY_TOL = 1e-8
REFINE = 8


@dataclass(frozen=True)
class FunctionalValue:
    name: str
    value: float
    order: int
    trunc_error: float

    def __float__(self):
        return float(self.value)

    def as_dict(self):
        return {"name": self.name, "value": self.value, "order": self.order,
                "trunc_error": self.trunc_error}


# -- matrix helpers ----------------------------------------------------------

def _asym(A):
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    return float(np.max(np.abs(A - np.swapaxes(A, -1, -2)), initial=0.0)) / scale


def _log_det2_sym(J):
    """Batched ``log det2`` of symmetric matrices ``(..., d, d)``."""
    lam = np.linalg.eigvalsh(J)
    if np.any(lam <= 0):
        raise ConvexityError(f"log det2 needs a positive definite matrix (min eigenvalue {lam.min():.3e})")
    return np.sum(1.0 - lam + np.log(lam), axis=-1)


def det2(A) -> float:
    """Fredholm-Carleman determinant ``det2(A) = e^{tr(I - A)} det(A)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return math.exp(float(np.trace(np.eye(len(A)) - A))) * float(np.linalg.det(A))


def log_det2(A, symmetric=None) -> float:
    """``log det2(A) = tr(I - A) + log det A``.

    A matrix that is symmetric to ``1e-8`` goes through a symmetric
    eigendecomposition; otherwise an LU factorization with partial pivoting
    is used. ``symmetric=True`` turns larger asymmetry into an error.

    Raises
    ------
    ConvexityError
        If ``det A <= 0``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    asym = _asym(A)
    if symmetric is True and asym > SYMMETRY_TOL:
        raise ValueError(f"matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    if asym <= SYMMETRY_TOL:
        return float(_log_det2_sym(0.5 * (A + A.T)))
    sign, logdet = np.linalg.slogdet(A)
    if sign <= 0:
        raise ConvexityError("log det2 needs a matrix with positive determinant")
    return float(np.trace(np.eye(len(A)) - A)) + float(logdet)


def ou_apply(f, x):
    """Ornstein-Uhlenbeck operator ``Lf = Delta f - <x, grad f>``."""
    pts, single = as_points(x, f.dim)
    out = np.trace(f.hessian(pts), axis1=-2, axis2=-1) - np.einsum("ij,ij->i", pts, f.grad(pts))
    return out[0] if single else out


# -- integration plumbing ------------------------------------------------------

def _fv(name, q, V, integrand):
    val = integrate_weighted(q, integrand, V)
    fine = integrate_weighted(q.refined(REFINE), integrand, V)
    return FunctionalValue(name, val, q.order, abs(val - fine))


def _split(q, *objs):
    """Decide whether to evaluate coordinate by coordinate.

    Returns per-coordinate tuples when ``q`` is one-dimensional but the
    objects are not; every potential must then be separable and every map a
    product (or the identity).
    """
    dims = {o.dim for o in objs if o is not None}
    if len(dims) != 1:
        raise DimensionError(f"inconsistent dimensions {sorted(dims)}")
    d = dims.pop()
    if q.dim == d:
        return None
    if q.dim != 1:
        raise DimensionError(f"rule dim {q.dim} does not match objects of dim {d}")
    cols = []
    for o in objs:
        if o is None:
            cols.append([None] * d)
        elif isinstance(o, Separable):
            cols.append(list(o.components))
        elif isinstance(o, Product):
            cols.append(list(o.components))
        elif isinstance(o, Identity):
            cols.append([Identity(1) for _ in range(d)])
        else:
            raise DimensionError(
                f"coordinatewise evaluation needs separable potentials and product maps, got {type(o).__name__}"
            )
    return list(zip(*cols))


def _sum_fv(name, q, parts):
    return FunctionalValue(
        name,
        math.fsum(p.value for p in parts),
        q.order,
        math.fsum(p.trunc_error for p in parts),
    )


def _additive(name, q, objs, fn):
    """Evaluate ``fn(q, *objs)`` directly, or coordinatewise and summed."""
    cols = _split(q, *objs)
    if cols is None:
        return fn(q, *objs)
    return _sum_fv(name, q, [fn(q, *c) for c in cols])


def _mapped(T, nodes):
    return T.value(nodes, extrapolate=True)


def _jac(T, nodes):
    return T.jacobian(nodes, extrapolate=True)


# -- integral functionals ------------------------------------------------------

def fisher_information(V, q) -> FunctionalValue:
    """``int |grad V|^2 e^{-V} dgamma``."""
    def one(q, V):
        return _fv("fisher", q, V, lambda x: np.einsum("ij,ij->i", V.grad(x), V.grad(x)))
    return _additive("fisher", q, (V,), one)


def relative_entropy(V, q) -> FunctionalValue:
    """``Ent_gamma(e^{-V}) = int (-V) e^{-V} dgamma`` for normalized ``V``.

    Raises
    ------
    NormalizationError
        If the result is below ``-1e-8`` (the potential cannot be normalized).
    """
    def one(q, V):
        return _fv("entropy", q, V, lambda x: -V.value(x))
    out = _additive("entropy", q, (V,), one)
    if out.value < -1e-8:
        raise NormalizationError(f"negative relative entropy {out.value:.3e}; is V normalized?")
    return out


def w2_cost_from_map(T, V, q) -> FunctionalValue:
    """``int |grad phi|^2 e^{-V} dgamma``, the squared Wasserstein distance."""
    def one(q, V, T):
        def f(x):
            u = _mapped(T, x) - x
            return np.einsum("ij,ij->i", u, u)
        return _fv("w2_sq", q, V, f)
    return _additive("w2_sq", q, (V, T), one)


def hs_phi(T, V, q) -> FunctionalValue:
    """``int ||hess phi||_HS^2 e^{-V} dgamma``."""
    def one(q, V, T):
        def f(x):
            P = _jac(T, x) - np.eye(T.dim)
            return np.einsum("nij,nij->n", P, P)
        return _fv("hs_phi", q, V, f)
    return _additive("hs_phi", q, (V, T), one)


def log_det2_map(T, V, q) -> FunctionalValue:
    """``int log det2(I + hess phi) e^{-V} dgamma``."""
    def one(q, V, T):
        return _fv("log_det2", q, V, lambda x: _log_det2_sym(_jac(T, x)))
    return _additive("log_det2", q, (V, T), one)


def cross_hs(T, W, V, q) -> FunctionalValue:
    """``int <hess W(T), hess phi>_HS e^{-V} dgamma``."""
    def one(q, V, T, W):
        def f(x):
            P = _jac(T, x) - np.eye(T.dim)
            return np.einsum("nij,nij->n", W.hessian(_mapped(T, x)), P)
        return _fv("cross_hs", q, V, f)
    return _additive("cross_hs", q, (V, T, W), one)


def nw_integral(T, W, V, q, form="phi") -> FunctionalValue:
    """``int N_W e^{-V} dgamma`` (see :func:`nw_term` for ``form``)."""
    name = "nw" if form == "phi" else f"nw_{form}"
    def one(q, V, T, W):
        return _fv(name, q, V, lambda x: nw_term(W, T, x, form=form, extrapolate=True))
    return _additive(name, q, (V, T, W), one)


def sandwich_integral(T, V, q) -> FunctionalValue:
    """``int sum_a ||J^{-1/2} D_a hess phi J^{-1/2}||_HS^2 e^{-V} dgamma``."""
    def one(q, V, T):
        return _fv("sandwich", q, V, lambda x: sandwich_term(T, x, extrapolate=True))
    return _additive("sandwich", q, (V, T), one)


def hessian_energy(W, q) -> FunctionalValue:
    """``int ||hess W||_HS^2 e^{-W} dgamma``."""
    def one(q, W):
        return _fv("hess_W", q, W, lambda x: np.einsum("nij,nij->n", W.hessian(x), W.hessian(x)))
    return _additive("hess_W", q, (W,), one)


# -- pointwise functionals -----------------------------------------------------

def ma_residual(V, W, T, x, extrapolate=False):
    """Log-scale Monge-Ampere defect.

    ``r = -V - [-W(T) + L phi - |grad phi|^2 / 2 + log det2(I + hess phi)]``,
    which vanishes exactly when ``T`` pushes ``e^{-V} gamma`` to ``e^{-W} gamma``.
    """
    pts, single = as_points(x, T.dim)
    Tx = T.value(pts, extrapolate=extrapolate)
    J = T.jacobian(pts, extrapolate=extrapolate)
    u = Tx - pts
    L_phi = np.trace(J, axis1=-2, axis2=-1) - T.dim - np.einsum("ij,ij->i", pts, u)
    rhs = -W.value(Tx) + L_phi - 0.5 * np.einsum("ij,ij->i", u, u) + _log_det2_sym(J)
    out = -V.value(pts) - rhs
    return out[0] if single else out


def nw_term(W, T, x, form="phi", extrapolate=False, step=1e-4):
    """``N_W = sum_a u_a^T hess W(T(x)) u_a`` over the standard basis.

    ``form="phi"`` uses ``u_a = D_a grad phi``, the a-th column of
    ``hess phi``; ``form="fd"`` obtains the same vectors from central
    differences of ``grad phi``; ``form="Phi"`` uses ``u_a = a + D_a grad phi``.
    """
    pts, single = as_points(x, T.dim)
    H = W.hessian(T.value(pts, extrapolate=extrapolate))
    if form == "fd":
        cols = []
        for k in range(T.dim):
            e = np.zeros(T.dim)
            e[k] = step
            cols.append((T.phi_grad(pts + e, extrapolate=True) - T.phi_grad(pts - e, extrapolate=True)) / (2 * step))
        U = np.stack(cols, axis=-1)
    else:
        U = T.jacobian(pts, extrapolate=extrapolate)
        if form == "phi":
            U = U - np.eye(T.dim)
        elif form != "Phi":
            raise ValueError(f"unknown N_W form {form!r}")
    out = np.einsum("nia,nij,nja->n", U, H, U)
    return out[0] if single else out


def _third_all(T, pts, extrapolate):
    if not T.supports_third:
        raise UnsupportedBackendError(f"backend {T.backend} has no third derivatives")
    return [T.third_derivative(pts, e, extrapolate=extrapolate) for e in np.eye(T.dim)]


def sandwich_term(T, x, extrapolate=False):
    """``sum_a ||(I + hess phi)^{-1/2} D_a hess phi (I + hess phi)^{-1/2}||_HS^2``."""
    pts, single = as_points(x, T.dim)
    R = sym_sqrt(T.jacobian(pts, extrapolate=extrapolate), inverse=True)
    out = np.zeros(len(pts))
    for D in _third_all(T, pts, extrapolate):
        S = R @ D @ R
        out += np.einsum("nij,nij->n", S, S)
    return out[0] if single else out


def third_hs_sq(T, x, extrapolate=False):
    """``||grad^3 phi||_HS^2 = sum_a ||D_a hess phi||_HS^2``."""
    pts, single = as_points(x, T.dim)
    out = np.zeros(len(pts))
    for D in _third_all(T, pts, extrapolate):
        out += np.einsum("nij,nij->n", D, D)
    return out[0] if single else out


def lemma33_diagnostic(f, V, q) -> dict:
    """Ratio behind the uniform bound on ``int (Lf)^2 e^{-|grad f|^2} e^{-V} dgamma``.

    Returns ``lhs``, ``rhs_components = (1, int ||hess f||^2, int |grad V|^2)``
    and ``implied_K = lhs / sum(rhs_components)``.
    """
    def lhs_integrand(x):
        g = f.grad(x)
        return ou_apply(f, x) ** 2 * np.exp(-np.einsum("ij,ij->i", g, g))

    lhs = _fv("lemma33_lhs", q, V, lhs_integrand)
    hess_f = _fv("hess_f", q, V, lambda x: np.einsum("nij,nij->n", f.hessian(x), f.hessian(x)))
    fisher = fisher_information(V, q)
    comps = (1.0, hess_f.value, fisher.value)
    return {
        "lhs": lhs.value,
        "rhs_components": comps,
        "implied_K": lhs.value / math.fsum(comps),
        "trunc_error": max(lhs.trunc_error, hess_f.trunc_error, fisher.trunc_error),
    }

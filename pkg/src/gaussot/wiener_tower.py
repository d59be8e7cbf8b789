"""Finite-dimensional stand-ins for the Wiener-space constructions.

The abstract Wiener space is realized as ``R^N`` with the standard Gaussian
measure and coordinate projections ``pi_n``. Available here: the
Ornstein-Uhlenbeck (Mehler) semigroup, the cutoff and truncation
regularizations of a potential, conditional projections of separable
quadratic potentials, and the nondecreasing tower of W2 costs along
``pi_1, pi_2, ...``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import functionals as F
from .errors import DimensionError, DomainError, NormalizationError
from .potentials import (
    FunctionField,
    Potential,
    Quadratic,
    Separable,
    Shifted,
    normalize,
)
from .quadrature import default_order, gauss_hermite, gauss_legendre_unit
from .transport import solve_product

__all__ = [
    "ou_semigroup",
    "smooth_cutoff",
    "cutoff_regularize",
    "truncate",
    "SeparableQuadraticSpec",
    "conditional_projection",
    "potential_projection",
    "TowerLevel",
    "tower_w2_sequence",
    "spec_potentials",
]

MAX_LEVELS = 12


# -- Ornstein-Uhlenbeck semigroup ---------------------------------------------

def _fiber_rule(dim, q):
    if q is None:
        return gauss_hermite(dim, default_order(dim))
    if q.dim != dim:
        raise DimensionError(f"fiber rule has dim {q.dim}, field has dim {dim}")
    return q


def ou_semigroup(f, eps, q=None):
    """Mehler semigroup ``P_eps f(x) = E f(e^{-eps} x + sqrt(1 - e^{-2 eps}) Y)``.

    Parameters
    ----------
    f : Field
        Field with ``value`` and, for the derivatives of the result, ``grad``
        and ``hessian``.
    eps : float
        Time, ``eps >= 0``. ``eps = 0`` returns ``f`` evaluated unchanged.
    q : QuadratureRule, optional
        Gauss-Hermite rule for ``Y`` (defaults to the standard order for
        ``f.dim``).

    Returns
    -------
    FunctionField
        Gradients use ``grad P_eps f = e^{-eps} P_eps grad f``.
    """
    eps = float(eps)
    if not eps >= 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    d = f.dim
    rule = _fiber_rule(d, q)
    a = math.exp(-eps)
    b = math.sqrt(-math.expm1(-2.0 * eps))
    y, w = rule.nodes, rule.weights

    def fiber(fn, pts, tail=()):
        out = np.empty((len(pts),) + tail)
        for i, x in enumerate(pts):
            vals = fn(a * x + b * y)
            out[i] = np.tensordot(w, vals, axes=(0, 0))
        return out

    def value(pts):
        if b == 0.0:
            return f.value(pts)
        return fiber(f.value, pts)

    def grad(pts):
        if b == 0.0:
            return f.grad(pts)
        return a * fiber(f.grad, pts, (d,))

    def hess(pts):
        if b == 0.0:
            return f.hessian(pts)
        return a * a * fiber(f.hessian, pts, (d, d))

    name = f"P_{eps:g}[{getattr(f, 'name', '') or type(f).__name__}]"
    return FunctionField(d, value, grad, hess, name=name)


# -- Cutoff regularization ----------------------------------------------------

def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def _smoothstep_d(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def _smoothstep_dd(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


def smooth_cutoff(n, dim, width=2.0):
    """Radial C^2 bump equal to 1 on ``|x| <= n`` and 0 on ``|x| >= n + width``.

    The transition is the quintic smoothstep, whose slope peaks at
    ``15 / (8 width)``, so ``|grad chi| <= 1`` for the default width.
    """
    n, width = float(n), float(width)

    def parts(pts):
        r = np.linalg.norm(pts, axis=1)
        t = (r - n) / width
        return r, 1.0 - _smoothstep(t), -_smoothstep_d(t) / width, -_smoothstep_dd(t) / width**2

    def value(pts):
        return parts(pts)[1]

    def grad(pts):
        r, _, s1, _ = parts(pts)
        safe = np.where(r > 0, r, 1.0)
        return (s1 / safe)[:, None] * pts

    def hess(pts):
        r, _, s1, s2 = parts(pts)
        safe = np.where(r > 0, r, 1.0)
        u = pts / safe[:, None]
        uu = u[:, :, None] * u[:, None, :]
        eye = np.eye(dim)[None]
        return s2[:, None, None] * uu + (s1 / safe)[:, None, None] * (eye - uu)

    return FunctionField(dim, value, grad, hess, name=f"chi_{n:g}")


class _Product(Potential):
    """Pointwise product ``chi * U`` with full derivatives."""

    kind = "cutoff"

    def __init__(self, chi, U):
        self.dim, self.semiconvexity_c = U.dim, None
        self.chi, self.U = chi, U

    def _value(self, pts):
        return self.chi.value(pts) * self.U.value(pts)

    def _grad(self, pts):
        return (self.chi.value(pts)[:, None] * self.U.grad(pts)
                + self.U.value(pts)[:, None] * self.chi.grad(pts))

    def _hessian(self, pts):
        c, gc, hc = self.chi.value(pts), self.chi.grad(pts), self.chi.hessian(pts)
        u, gu, hu = self.U.value(pts), self.U.grad(pts), self.U.hessian(pts)
        cross = gc[:, :, None] * gu[:, None, :]
        return c[:, None, None] * hu + u[:, None, None] * hc + cross + np.swapaxes(cross, 1, 2)

    def __repr__(self):
        return f"Cutoff({self.chi.name}, {self.U})"


def cutoff_regularize(V, n, q=None, fiber=None):
    """Normalized ``chi_n * P_{1/n} V``.

    ``q`` is the rule used for the normalizing constant and ``fiber`` the
    rule for the semigroup (both default to the standard order).
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    q = q if q is not None else gauss_hermite(V.dim, default_order(V.dim))
    smoothed = ou_semigroup(V, 1.0 / n, fiber)
    return normalize(_Product(smooth_cutoff(n, V.dim), smoothed), q)


# -- Truncation ---------------------------------------------------------------

class _Truncated(Potential):
    kind = "truncated"

    def __init__(self, base, level):
        self.dim, self.semiconvexity_c = base.dim, base.semiconvexity_c
        self.base, self.level = base, float(level)

    def _value(self, pts):
        return np.minimum(self.base.value(pts), self.level)

    def _grad(self, pts):
        active = self.base.value(pts) < self.level
        return np.where(active[:, None], self.base.grad(pts), 0.0)

    def _hessian(self, pts):
        active = self.base.value(pts) < self.level
        return np.where(active[:, None, None], self.base.hessian(pts), 0.0)

    def __repr__(self):
        return f"min({self.base}, {self.level:g})"


def _mass_1d(p, radius=12.0, cells=6000, order=8):
    # Composite Gauss-Legendre resolves the kink of V ^ n far better than GH.
    t, w = gauss_legendre_unit(order)
    edges = np.linspace(-radius, radius, cells + 1)
    h = edges[1] - edges[0]
    x = (edges[:-1, None] + h * t[None, :]).ravel()
    ww = np.tile(w * h, cells)
    dens = np.exp(-p.value(x[:, None]) - 0.5 * x**2) / math.sqrt(2 * math.pi)
    return math.fsum(ww * dens)


def truncate(V, n, q=None):
    """Return ``(normalized V ^ n, a_n)`` with ``a_n = int e^{-V ^ n} dgamma``.

    One-dimensional masses use a composite Gauss-Legendre rule on
    ``[-12, 12]``; higher dimensions use ``q``. Since ``V ^ n`` grows with
    ``n``, ``a_n`` decreases to ``int e^{-V} dgamma``.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    tv = _Truncated(V, n)
    if V.dim == 1:
        a = _mass_1d(tv)
    else:
        q = q if q is not None else gauss_hermite(V.dim, default_order(V.dim))
        a = F.integrate_weighted(q, lambda x: np.ones(len(x)), tv)
    if not a > 0 or not math.isfinite(a):
        raise NormalizationError(f"truncated mass a_{n} = {a!r}")
    return Shifted(tv, math.log(a)), a


# -- Separable quadratic projections -----------------------------------------

@dataclass(frozen=True)
class SeparableQuadraticSpec:
    """``W(x) = sum_k lambda_k x_k^2`` on ``R^N`` with ``1 + 2 lambda_k > 0``."""

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        bad = [v for v in lam if not v > -0.5]
        if bad:
            raise DomainError(f"lambda_k must exceed -1/2, got {bad[0]}")
        object.__setattr__(self, "lambdas", lam)

    @property
    def dim(self):
        return len(self.lambdas)

    def component(self, k, normalized=True):
        lam = self.lambdas[k]
        return Quadratic([[2.0 * lam]], k=-0.5 * math.log1p(2 * lam) if normalized else 0.0)

    def potential(self, normalized=True):
        return Separable([self.component(k, normalized) for k in range(self.dim)])


def _alpha(lambdas):
    return math.exp(-0.5 * math.fsum(math.log1p(2 * v) for v in lambdas))


def conditional_projection(spec, n):
    """Density projection of ``e^{-W}`` onto the first ``n`` coordinates.

    Returns ``(W_n, alpha_n)`` where ``W_n`` is normalized on ``R^n`` and
    ``alpha_n = prod_{k>n} (1 + 2 lambda_k)^{-1/2}``. ``W_0`` is ``None``.
    """
    if not 0 <= n <= spec.dim:
        raise DomainError(f"n must lie in [0, {spec.dim}], got {n}")
    alpha = _alpha(spec.lambdas[n:])
    if n == 0:
        return None, alpha
    return Separable([spec.component(k) for k in range(n)]), alpha


def potential_projection(spec, n):
    """Projection of the potential ``E(W | F_n)`` for an unnormalized spec.

    Returns ``(U_n, shift)``: ``U_n`` is the potential on ``R^n`` before
    normalization and ``shift = sum_{k>n} lambda_k`` is the constant the
    discarded coordinates contribute. After normalization it agrees with
    ``conditional_projection``.
    """
    if not 1 <= n <= spec.dim:
        raise DomainError(f"n must lie in [1, {spec.dim}], got {n}")
    shift = math.fsum(spec.lambdas[n:])
    U = Separable([Quadratic([[2.0 * spec.lambdas[k]]], k=shift if k == 0 else 0.0) for k in range(n)])
    return U, shift


# -- W2 tower -----------------------------------------------------------------

@dataclass(frozen=True)
class TowerLevel:
    n: int
    V_n: Potential
    W_n: Potential
    alpha_n: float
    w2_sq: float
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def row(self):
        return {"n": self.n, "w2_sq": self.w2_sq, "alpha_n": self.alpha_n, "residual": self.residual}


def spec_potentials(spec):
    """``(V, W)`` for the tower of a spec: ``V = 0`` and the raw ``W``."""
    V = Separable([Quadratic([[0.0]]) for _ in range(spec.dim)])
    return V, spec.potential(normalized=False)


def _components(P, N):
    if isinstance(P, Separable) and all(c.dim == 1 for c in P.components):
        return list(P.components)
    if P.dim == 1 and N == 1:
        return [P]
    raise DimensionError("tower potentials must be separable into 1D components")


def tower_w2_sequence(V, W, solver="quantile", q=None, residual_radius=3.0):
    """W2 costs along the coordinate projections for separable ``V`` and ``W``.

    Components need not be normalized; each is normalized in 1D and, for
    ``W``, the discarded masses give ``alpha_n = prod_{k>n} int e^{-W_k} dgamma``.

    Returns
    -------
    list of TowerLevel
        Levels ``n = 1..N`` with ``w2_sq`` the sum of the first ``n``
        one-dimensional costs.
    """
    vs, ws = _components(V, V.dim), _components(W, W.dim)
    if len(vs) != len(ws):
        raise DimensionError(f"V has {len(vs)} coordinates but W has {len(ws)}")
    N = len(vs)
    if not 1 <= N <= MAX_LEVELS:
        raise DimensionError(f"tower supports 1..{MAX_LEVELS} coordinates, got {N}")
    q1 = q.axis() if q is not None and q.dim != 1 else (q or gauss_hermite(1, default_order(1)))
    vn = [normalize(v, q1) for v in vs]
    wn = [normalize(w, q1) for w in ws]
    # Shifted offsets are log-masses of the raw components.
    log_mass = [w.offset - (raw.offset if isinstance(raw, Shifted) else 0.0)
                for w, raw in zip(wn, ws)]
    probe = np.linspace(-residual_radius, residual_radius, 121)[:, None]
    costs, resid = [], []
    for v, w in zip(vn, wn):
        T = _solve_1d(v, w, solver)
        costs.append(F.w2_cost_from_map(T, v, q1).value)
        resid.append(float(np.max(np.abs(F.ma_residual(v, w, T, probe)))))
    levels = []
    for n in range(1, N + 1):
        alpha = math.exp(math.fsum(log_mass[n:])) if n < N else 1.0
        levels.append(TowerLevel(
            n=n,
            V_n=Separable(vn[:n]),
            W_n=Separable(wn[:n]),
            alpha_n=alpha,
            w2_sq=math.fsum(costs[:n]),
            residual=max(resid[:n]),
            diagnostics={"cost_k": costs[n - 1]},
        ))
    return levels


def _solve_1d(V, W, solver):
    T = solve_product(Separable([V]), Separable([W]), solver=solver)
    comps = getattr(T, "components", None)
    return comps[0] if comps else T

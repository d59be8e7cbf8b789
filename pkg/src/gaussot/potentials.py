"""Potentials ``V`` describing weighted Gaussian measures ``e^{-V} gamma``.

All fields are vectorized: ``value``, ``grad`` and ``hessian`` accept a single
point of shape ``(d,)`` or a batch of shape ``(n, d)`` and return ``()``/``(n,)``,
``(d,)``/``(n, d)`` and ``(d, d)``/``(n, d, d)`` respectively. Every library
potential carries analytic derivatives; there is deliberately no
finite-difference kind.
"""
from __future__ import annotations

import math
import numpy as np

from .errors import DimensionError, NormalizationError
from .quadrature import QuadratureRule, SampleSet, mc_sample

__all__ = [
    "Field",
    "FunctionField",
    "Potential",
    "Quadratic",
    "Separable",
    "Polynomial",
    "Shifted",
    "evaluate",
    "grad",
    "hessian",
    "normalize",
    "estimate_semiconvexity",
    "default_cloud",
    "gaussian_potential",
    "as_quadratic",
    "as_gaussian",
    "to_literal",
    "from_literal",
]

MAX_POLY_DEGREE = 8
CLOUD_SIZE = 4096
CLOUD_STREAM = 0x5E31


def as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to an ``(n, dim)`` array; the flag records a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


class Field:
    """A scalar field on R^dim with gradient and Hessian oracles."""

    dim: int

    def value(self, x):
        pts, single = as_points(x, self.dim)
        out = self._value(pts)
        return out[0] if single else out

    def grad(self, x):
        pts, single = as_points(x, self.dim)
        out = self._grad(pts)
        return out[0] if single else out

    def hessian(self, x):
        pts, single = as_points(x, self.dim)
        out = self._hessian(pts)
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out[0] if single else out

    def __call__(self, x):
        return self.value(x)

    def _value(self, pts):
        raise NotImplementedError

    def _grad(self, pts):
        raise NotImplementedError

    def _hessian(self, pts):
        raise NotImplementedError


class FunctionField(Field):
    """Field assembled from vectorized callables on ``(n, dim)`` arrays."""

    def __init__(self, dim, value, grad, hessian=None, name=""):
        self.dim = int(dim)
        self._f, self._g, self._h = value, grad, hessian
        self.name = name

    def _value(self, pts):
        return np.asarray(self._f(pts), dtype=float).reshape(len(pts))

    def _grad(self, pts):
        return np.asarray(self._g(pts), dtype=float).reshape(len(pts), self.dim)

    def _hessian(self, pts):
        if self._h is None:
            raise NotImplementedError(f"field {self.name!r} has no Hessian")
        return np.asarray(self._h(pts), dtype=float).reshape(len(pts), self.dim, self.dim)

    def __repr__(self):
        return f"FunctionField({self.name or '?'}, dim={self.dim})"


class Potential(Field):
    """Base class of potentials.

    ``semiconvexity_c`` is a declared ``c >= 0`` with ``hessian >= -c Id``, or
    ``None`` when unknown.
    """

    kind = "abstract"
    semiconvexity_c: float | None = None


class Quadratic(Potential):
    """``V(x) = 1/2 <A x, x> + <b, x> + k``."""

    kind = "quadratic"

    def __init__(self, A, b=None, k=0.0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(A))):
            raise ValueError("A must be symmetric")
        self.A = 0.5 * (A + A.T)
        self.dim = A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float).reshape(self.dim)
        self.k = float(k)
        self.A.setflags(write=False)
        self.b.setflags(write=False)
        lam_min = float(np.linalg.eigvalsh(self.A)[0])
        self.semiconvexity_c = max(0.0, -lam_min)

    def _value(self, pts):
        return 0.5 * np.einsum("ni,ij,nj->n", pts, self.A, pts) + pts @ self.b + self.k

    def _grad(self, pts):
        return pts @ self.A + self.b

    def _hessian(self, pts):
        return np.broadcast_to(self.A, (len(pts), self.dim, self.dim)).copy()

    def __repr__(self):
        return f"Quadratic(A={self.A.tolist()}, b={self.b.tolist()}, k={self.k!r})"


class Separable(Potential):
    """``V(x) = sum_i V_i(x_i)`` with one-dimensional components."""

    kind = "separable"

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("separable potential needs at least one component")
        for c in components:
            if c.dim != 1:
                raise DimensionError("separable components must be one-dimensional")
        self.components = components
        self.dim = len(components)
        cs = [c.semiconvexity_c for c in components]
        self.semiconvexity_c = None if any(c is None for c in cs) else max(cs)

    def _value(self, pts):
        return sum(c._value(pts[:, i : i + 1]) for i, c in enumerate(self.components))

    def _grad(self, pts):
        return np.stack(
            [c._grad(pts[:, i : i + 1])[:, 0] for i, c in enumerate(self.components)], axis=-1
        )

    def _hessian(self, pts):
        diag = np.stack(
            [c._hessian(pts[:, i : i + 1])[:, 0, 0] for i, c in enumerate(self.components)],
            axis=-1,
        )
        out = np.zeros((len(pts), self.dim, self.dim))
        idx = np.arange(self.dim)
        out[:, idx, idx] = diag
        return out

    def __repr__(self):
        return f"Separable({list(self.components)!r})"


class Polynomial(Potential):
    """Polynomial potential given by a table ``{exponents: coefficient}``.

    ``terms`` maps exponent tuples (one entry per coordinate) to coefficients;
    total degree is capped at 8.
    """

    kind = "polynomial"

    def __init__(self, terms, dim=None, semiconvexity_c=None):
        items = [(tuple(int(e) for e in np.atleast_1d(k)), float(v)) for k, v in dict(terms).items()]
        items = [(k, v) for k, v in items if v != 0.0]
        if dim is None:
            if not items:
                raise ValueError("cannot infer dim of an empty polynomial")
            dim = len(items[0][0])
        self.dim = int(dim)
        for k, _ in items:
            if len(k) != self.dim:
                raise DimensionError(f"exponent {k} does not match dim {self.dim}")
            if min(k, default=0) < 0:
                raise ValueError(f"negative exponent in {k}")
            if sum(k) > MAX_POLY_DEGREE:
                raise ValueError(f"total degree {sum(k)} exceeds {MAX_POLY_DEGREE}")
        items.sort()
        self.terms = dict(items)
        self._E = np.array([k for k, _ in items], dtype=int).reshape(len(items), self.dim)
        self._c = np.array([v for _, v in items], dtype=float)
        self.semiconvexity_c = semiconvexity_c
        self.degree = int(self._E.sum(axis=1).max(initial=0))

    @staticmethod
    def _monomials(pts, E):
        # powers[n, i, k] = x[n, i] ** k
        powers = pts[:, :, None] ** np.arange(MAX_POLY_DEGREE + 1)
        cols = [powers[:, i, E[:, i]] for i in range(E.shape[1])]
        return np.prod(np.stack(cols, axis=0), axis=0) if cols else np.ones((len(pts), len(E)))

    def _derivative(self, E, c, j):
        mask = E[:, j] > 0
        E2 = E[mask].copy()
        c2 = c[mask] * E2[:, j]
        E2[:, j] -= 1
        return E2, c2

    def _value(self, pts):
        if not len(self._c):
            return np.zeros(len(pts))
        return self._monomials(pts, self._E) @ self._c

    def _grad(self, pts):
        out = np.zeros((len(pts), self.dim))
        for j in range(self.dim):
            E, c = self._derivative(self._E, self._c, j)
            if len(c):
                out[:, j] = self._monomials(pts, E) @ c
        return out

    def _hessian(self, pts):
        out = np.zeros((len(pts), self.dim, self.dim))
        for j in range(self.dim):
            Ej, cj = self._derivative(self._E, self._c, j)
            for k in range(j, self.dim):
                E, c = self._derivative(Ej, cj, k)
                if len(c):
                    out[:, j, k] = self._monomials(pts, E) @ c
                    out[:, k, j] = out[:, j, k]
        return out

    def __repr__(self):
        return f"Polynomial({self.terms!r}, dim={self.dim})"


class Shifted(Potential):
    """``V(x) = base(x) + offset``."""

    kind = "shifted"

    def __init__(self, base, offset):
        self.base = base
        self.offset = float(offset)
        self.dim = base.dim
        self.semiconvexity_c = base.semiconvexity_c

    def _value(self, pts):
        return self.base._value(pts) + self.offset

    def _grad(self, pts):
        return self.base._grad(pts)

    def _hessian(self, pts):
        return self.base._hessian(pts)

    def __repr__(self):
        return f"Shifted({self.base!r}, offset={self.offset!r})"


def evaluate(p: Field, x):
    return p.value(x)


def grad(p: Field, x):
    return p.grad(x)


def hessian(p: Field, x):
    return p.hessian(x)


def as_quadratic(p: Potential):
    """Return ``(A, b, k)`` if ``p`` is exactly quadratic, else ``None``."""
    if isinstance(p, Quadratic):
        return p.A, p.b, p.k
    if isinstance(p, Shifted):
        inner = as_quadratic(p.base)
        if inner is None:
            return None
        A, b, k = inner
        return A, b, k + p.offset
    if isinstance(p, Separable):
        parts = [as_quadratic(c) for c in p.components]
        if any(part is None for part in parts):
            return None
        A = np.diag([part[0][0, 0] for part in parts])
        b = np.array([part[1][0] for part in parts])
        return A, b, math.fsum(part[2] for part in parts)
    return None


def as_gaussian(p: Potential):
    """Return ``(mean, cov)`` of ``e^{-p} gamma`` when it is a nondegenerate Gaussian."""
    quad = as_quadratic(p)
    if quad is None:
        return None
    A, b, _ = quad
    prec = np.eye(len(b)) + A
    eig = np.linalg.eigvalsh(prec)
    if eig[0] <= 0:
        return None
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    return -cov @ b, cov


def gaussian_potential(mean, cov) -> Quadratic:
    """Normalized potential ``V`` with ``e^{-V} gamma = N(mean, cov)``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    mean = np.asarray(mean, dtype=float).reshape(cov.shape[0])
    prec = np.linalg.inv(cov)
    prec = 0.5 * (prec + prec.T)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("covariance must be positive definite")
    A = prec - np.eye(len(mean))
    b = -prec @ mean
    k = 0.5 * float(mean @ prec @ mean) + 0.5 * logdet
    return Quadratic(A, b, k)


def _log_partition_quadratic(A, b, k) -> float:
    prec = np.eye(len(b)) + A
    eig = np.linalg.eigvalsh(prec)
    if eig[0] <= 0:
        raise NormalizationError("e^{-V} is not integrable against gamma: I + A is not positive definite")
    sol = np.linalg.solve(prec, b)
    return -0.5 * math.fsum(np.log(eig)) + 0.5 * float(b @ sol) - k


def normalize(p: Potential, q: QuadratureRule) -> Potential:
    """Shift ``p`` so that ``∫ e^{-p} dγ = 1``.

    Quadratic potentials use the exact Gaussian integral; separable potentials
    are normalized component by component with the one-dimensional rule of
    the same order; everything else uses ``q`` directly.
    """
    if isinstance(p, Separable):
        return Separable([normalize(c, q.axis()) for c in p.components])
    if isinstance(p, Shifted):
        inner = normalize(p.base, q)
        if isinstance(inner, Shifted) and inner.base is p.base:
            return Shifted(p.base, inner.offset)
    quad = as_quadratic(p) if not isinstance(p, Separable) else None
    if quad is not None:
        offset = _log_partition_quadratic(*quad)
    else:
        if q.dim != p.dim:
            raise DimensionError(f"rule dim {q.dim} != potential dim {p.dim}")
        with np.errstate(over="ignore"):
            vals = np.exp(-p.value(q.nodes))
        if not np.all(np.isfinite(vals)):
            i = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise NormalizationError(f"e^{{-V}} overflows at node {q.nodes[i].tolist()}")
        Z = math.fsum(q.weights * vals)
        if not Z > 0:
            raise NormalizationError(f"non-positive normalizing constant {Z!r}")
        offset = math.log(Z)
    if isinstance(p, Shifted):
        return Shifted(p.base, p.offset + offset)
    return Shifted(p, offset)


def default_cloud(dim: int, seed: int) -> np.ndarray:
    return mc_sample(dim, CLOUD_SIZE, seed, stream=CLOUD_STREAM).points


def estimate_semiconvexity(p: Potential, cloud) -> float:
    """Return ``max(0, -min smallest Hessian eigenvalue)`` over ``cloud``.

    Quadratic potentials return the exact value regardless of the cloud.
    """
    quad = as_quadratic(p)
    if quad is not None:
        return max(0.0, -float(np.linalg.eigvalsh(quad[0])[0]))
    pts = cloud.points if isinstance(cloud, SampleSet) else np.asarray(cloud, dtype=float)
    if isinstance(p, Separable):
        return max(
            estimate_semiconvexity(c, pts[:, i : i + 1]) for i, c in enumerate(p.components)
        )
    pts, _ = as_points(pts, p.dim)
    if not len(pts):
        raise ValueError("empty point cloud")
    lam = np.linalg.eigvalsh(p.hessian(pts))[:, 0]
    return max(0.0, -float(lam.min()))


def to_literal(p: Potential) -> dict:
    """Serialize a literal potential to the tagged-record form used in configs."""
    if isinstance(p, Quadratic):
        return {"kind": "quadratic", "A": p.A.tolist(), "b": p.b.tolist(), "k": p.k}
    if isinstance(p, Separable):
        return {"kind": "separable", "components": [to_literal(c) for c in p.components]}
    if isinstance(p, Polynomial):
        out = {
            "kind": "polynomial",
            "dim": p.dim,
            "terms": [{"coef": v, "powers": list(k)} for k, v in p.terms.items()],
        }
        if p.semiconvexity_c is not None:
            out["semiconvexity_c"] = p.semiconvexity_c
        return out
    if isinstance(p, Shifted):
        return {"kind": "shifted", "base": to_literal(p.base), "offset": p.offset}
    raise TypeError(f"potential kind {p.kind!r} has no literal form")


def from_literal(rec: dict) -> Potential:
    """Inverse of :func:`to_literal`; also accepts ``kind = "gaussian"`` and ``"zero"``."""
    kind = rec.get("kind")
    if kind == "quadratic":
        A = np.atleast_2d(np.asarray(rec["A"], dtype=float))
        return Quadratic(A, rec.get("b"), rec.get("k", 0.0))
    if kind == "zero":
        dim = int(rec.get("dim", 1))
        return Quadratic(np.zeros((dim, dim)))
    if kind == "gaussian":
        cov = np.atleast_2d(np.asarray(rec["cov"], dtype=float))
        mean = rec.get("mean", [0.0] * cov.shape[0])
        return gaussian_potential(mean, cov)
    if kind == "separable":
        return Separable([from_literal(c) for c in rec["components"]])
    if kind == "polynomial":
        terms = {}
        for t in rec["terms"]:
            key = tuple(int(e) for e in t["powers"])
            terms[key] = terms.get(key, 0.0) + float(t["coef"])
        return Polynomial(terms, dim=rec.get("dim"), semiconvexity_c=rec.get("semiconvexity_c"))
    if kind == "shifted":
        return Shifted(from_literal(rec["base"]), rec["offset"])
    raise ValueError(f"unknown potential kind {kind!r}")

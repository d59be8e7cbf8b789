"""Integration against the standard Gaussian measure and its weighted versions.

Deterministic integration uses tensor-product Gauss-Hermite rules with the
probabilists' weight, normalized so that the weights sum to one. Every
reduction goes through :func:`math.fsum`, which is exactly rounded and hence
independent of evaluation order; this is what makes repeated runs
bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionError, QuadratureError

__all__ = [
    "DEFAULT_ORDERS",
    "MAX_NODES",
    "QuadratureRule",
    "SampleSet",
    "default_order",
    "gauss_hermite",
    "gauss_legendre_unit",
    "integrate",
    "integrate_weighted",
    "mc_sample",
]

DEFAULT_ORDERS = {1: 60, 2: 40, 3: 24, 4: 12}
MAX_NODES = 10**7
MAX_TENSOR_DIM = 4


def default_order(dim: int) -> int:
    try:
        return DEFAULT_ORDERS[dim]
    except KeyError:
        raise DimensionError(f"no default tensor order for dim={dim}") from None


@lru_cache(maxsize=None)
def _hermite_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / math.fsum(w)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Hermite rule for integrals against ``gamma`` on R^dim."""

    dim: int
    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def axis(self) -> "QuadratureRule":
        """The one-dimensional rule of the same order."""
        return gauss_hermite(1, self.order)

    def refined(self, extra: int = 8) -> "QuadratureRule":
        return gauss_hermite(self.dim, self.order + extra)


@lru_cache(maxsize=32)
def gauss_hermite(dim: int, order: int) -> QuadratureRule:
    """Build the tensor-product rule with ``order`` points per axis.

    The rule integrates polynomials of per-axis degree ``<= 2*order - 1``
    exactly under the standard Gaussian.

    Raises
    ------
    DimensionError
        If ``dim`` is outside ``1..4``.
    QuadratureError
        If ``order < 2`` or the node count ``order**dim`` exceeds ``MAX_NODES``.
    """
    if not 1 <= dim <= MAX_TENSOR_DIM:
        raise DimensionError(f"tensor rules support 1 <= dim <= {MAX_TENSOR_DIM}, got {dim}")
    if order < 2:
        raise QuadratureError(f"order must be >= 2, got {order}")
    if order**dim > MAX_NODES:
        raise QuadratureError(f"node budget exceeded: {order}^{dim} > {MAX_NODES}")
    x, w = _hermite_1d(order)
    if dim == 1:
        nodes = x[:, None].copy()
        weights = w.copy()
    else:
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*([w] * dim), indexing="ij")
        weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(dim=dim, order=order, nodes=nodes, weights=weights)


def _check_finite(values: np.ndarray, q: QuadratureRule) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise QuadratureError(
            f"non-finite integrand {values[i]!r} at node {i} = {q.nodes[i].tolist()}"
        )


def _evaluate(q: QuadratureRule, f) -> np.ndarray:
    values = np.asarray(f(q.nodes), dtype=float)
    if values.ndim == 0:
        values = np.full(q.size, float(values))
    if values.shape != (q.size,):
        raise QuadratureError(
            f"integrand returned shape {values.shape}, expected ({q.size},)"
        )
    return values


def integrate(q: QuadratureRule, f) -> float:
    """Return ``sum_i w_i f(x_i)``.

    ``f`` receives the full ``(N, dim)`` node array and must return ``N``
    values (or a scalar for constant integrands).
    """
    values = _evaluate(q, f)
    _check_finite(values, q)
    return math.fsum(q.weights * values)


def integrate_weighted(q: QuadratureRule, f, V) -> float:
    """Return ``sum_i w_i f(x_i) exp(-V(x_i))``, i.e. an integral against ``e^{-V} gamma``."""
    if V.dim != q.dim:
        raise DimensionError(f"potential dim {V.dim} != rule dim {q.dim}")
    values = _evaluate(q, f) * np.exp(-V.value(q.nodes))
    _check_finite(values, q)
    return math.fsum(q.weights * values)


@lru_cache(maxsize=None)
def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@dataclass(frozen=True)
class SampleSet:
    dim: int
    count: int
    seed: int
    points: np.ndarray = field(repr=False)
    stream: int = 0


def mc_sample(dim: int, count: int, seed: int, stream: int = 0) -> SampleSet:
    """Draw ``count`` i.i.d. standard Gaussian points in R^dim.

    The generator is Philox keyed by ``(seed, stream)``, so independent streams
    can be drawn in parallel and each is reproducible on its own.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    points = rng.standard_normal((count, dim))
    points.setflags(write=False)
    return SampleSet(dim=dim, count=count, seed=seed, points=points, stream=stream)


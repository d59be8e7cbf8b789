"""Entropic optimal transport on a tensor grid with log-domain Sinkhorn."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp, softmax

from ..errors import DimensionError, DomainError, SolverError
from .base import TransportMap

DEFAULT_SCHEDULE = (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001)
MARGINAL_TOL = 1e-8
MAX_ITER = 10_000
MAX_GRID = 10**6
_CHUNK_ENTRIES = 4_000_000


def _axis_grid(radius, points):
    return np.linspace(-radius, radius, points)


def _tensor_points(z, dim):
    grids = np.meshgrid(*([z] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _lse_last(X, C):
    """``out[..., i] = log sum_j exp(X[..., j] - C[i, j])`` with in-place work arrays."""
    A = X[..., None, :] - C
    mx = A.max(axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    A -= mx
    # flush far-tail terms to exact zero; denormal exponentials are very slow
    np.maximum(A, -700.0, out=A)
    np.exp(A, out=A)
    with np.errstate(divide="ignore"):
        return np.log(A.sum(axis=-1)) + mx[..., 0]


def _sep_lse(H, C):
    """``out[i1..id] = log sum_j exp(H[j1..jd] - sum_k C[i_k, j_k])``.

    The cost is separable, so the reduction is done one axis at a time.
    """
    out = H
    for axis in range(H.ndim):
        moved = np.moveaxis(out, axis, -1)
        out = np.moveaxis(_lse_last(moved, C), -1, axis)
    return out


def _log_weights(V, pts, shape):
    with np.errstate(over="ignore", invalid="ignore"):
        lw = -V.value(pts) - 0.5 * np.einsum("ij,ij->i", pts, pts)
    if not np.all(np.isfinite(lw)):
        raise SolverError("potential is not finite on the transport grid")
    lw = lw - logsumexp(lw)
    return lw.reshape(shape)


class EntropicGrid(TransportMap):
    """Barycentric projection of an entropic coupling on a tensor grid.

    ``T(x) = sum_y y pi(y | x)`` with the conditional coupling extended
    out of sample through the target dual potential ``g``.
    """

    backend = "entropic"
    supports_third = False

    def __init__(self, radius, points, epsilon, g, log_b, source=None, target=None, f=None, trace=None):
        g = np.asarray(g, dtype=float)
        super().__init__(g.ndim, source, target)
        self.radius = float(radius)
        self.points = int(points)
        self.epsilon = float(epsilon)
        self.g = g
        self.log_b = np.asarray(log_b, dtype=float).reshape(g.shape)
        self.f = None if f is None else np.asarray(f, dtype=float).reshape(g.shape)
        self.trace = list(trace or [])
        self.axis = _axis_grid(self.radius, self.points)
        self._ypts = _tensor_points(self.axis, self.dim)
        self._hg = (self.g / self.epsilon + self.log_b).ravel()
        self.fd_step = 1e-4 * self.radius

    def _check_domain(self, pts, extrapolate):
        if not extrapolate and np.any(np.abs(pts) > self.radius):
            i = int(np.flatnonzero(np.any(np.abs(pts) > self.radius, axis=1))[0])
            raise DomainError(f"probe {pts[i].tolist()} outside the grid box [-{self.radius}, {self.radius}]^{self.dim}")

    def _conditional(self, pts):
        """Yield ``(slice, weights)`` chunks of the conditional law ``pi(. | x)``."""
        per = max(1, _CHUNK_ENTRIES // len(self._hg))
        for start in range(0, len(pts), per):
            chunk = pts[start : start + per]
            logits = np.repeat(self._hg[None, :], len(chunk), axis=0)
            for k in range(self.dim):
                logits -= (chunk[:, k : k + 1] - self._ypts[None, :, k]) ** 2 / (2 * self.epsilon)
            yield slice(start, start + len(chunk)), softmax(logits, axis=1)

    def _value(self, pts):
        out = np.empty_like(pts)
        for sl, w in self._conditional(pts):
            out[sl] = w @ self._ypts
        return out

    def conditional_covariance(self, pts):
        """Covariance of ``pi(. | x)``; equals ``epsilon`` times the exact map Jacobian."""
        out = np.empty((len(pts), self.dim, self.dim))
        for sl, w in self._conditional(pts):
            mean = w @ self._ypts
            second = np.einsum("nj,ja,jb->nab", w, self._ypts, self._ypts)
            out[sl] = second - mean[:, :, None] * mean[:, None, :]
        return out

    def _jacobian(self, pts):
        h = self.fd_step
        cols = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = h
            cols.append((self._value(pts + e) - self._value(pts - e)) / (2 * h))
        # cols[k][n, i] = dT_i / dx_k
        return np.stack(cols, axis=-1)


def _sinkhorn_level(f, g, log_a, log_b, a, C, eps, tol, max_iter):
    """Run Sinkhorn at one regularization level, warm-started from ``(f, g)``.

    After 20 plain iterations the linear contraction rate ``r`` is estimated
    and the updates are over-relaxed with ``omega = 2 / (1 + sqrt(1 - r))``
    (capped at 1.9). If the error ever grows tenfold past the best iterate,
    the best iterate is restored and plain iterations resume.
    """
    omega = 1.0
    errs = []
    best = (math.inf, f, g)
    history = []
    err = math.inf
    for it in range(1, max_iter + 1):
        S = _sep_lse(g / eps + log_b, C)
        err = math.fsum((a * np.abs(np.expm1(f / eps + S))).ravel())
        if it % 100 == 1:
            history.append(err)
        if err <= tol:
            break
        errs.append(err)
        if err < best[0]:
            best = (err, f, g)
        elif omega > 1.0 and err > 10 * best[0]:
            _, f, g = best
            omega, errs = 1.0, []
            continue
        if omega == 1.0 and len(errs) == 20 and errs[-1] < errs[-11]:
            r = (errs[-1] / errs[-11]) ** 0.1
            omega = min(1.9, 2.0 / (1.0 + math.sqrt(1.0 - r)))
        f = (1 - omega) * f + omega * (-eps * S)
        g = (1 - omega) * g + omega * (-eps * _sep_lse(f / eps + log_a, C))
    return f, g, {"epsilon": eps, "iterations": it, "marginal_error": err,
                  "omega": omega, "history": history}


def solve_entropic_grid(V, W, radius=8.0, points=321, schedule=DEFAULT_SCHEDULE,
                        tol=MARGINAL_TOL, max_iter=MAX_ITER) -> EntropicGrid:
    """Log-domain Sinkhorn with epsilon-scaling between grid discretizations.

    Parameters
    ----------
    V, W : Potential
        Source and target potentials, ``dim <= 3``.
    radius, points : float, int
        The grid is ``points`` equispaced nodes per axis on ``[-radius, radius]``.
    schedule : sequence of float
        Strictly decreasing regularization levels; the last one is final.
    tol : float
        Target L1 error of the source marginal.

    Raises
    ------
    SolverError
        If some level fails to reach ``tol`` within ``max_iter`` iterations.
        The error carries the per-level iteration trace.
    """
    if V.dim != W.dim:
        raise DimensionError(f"source dim {V.dim} != target dim {W.dim}")
    d = V.dim
    if d > 3:
        raise DimensionError("the entropic grid solver supports dim <= 3")
    if points**d > MAX_GRID:
        raise SolverError(f"grid size {points}^{d} exceeds {MAX_GRID}")
    schedule = [float(e) for e in schedule]
    if not schedule or schedule[-1] <= 0 or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be a strictly decreasing list of positive values")
    z = _axis_grid(radius, points)
    pts = _tensor_points(z, d)
    shape = (points,) * d
    log_a = _log_weights(V, pts, shape)
    log_b = _log_weights(W, pts, shape)
    a = np.exp(log_a)
    half_sq = 0.5 * (z[:, None] - z[None, :]) ** 2
    f = np.zeros(shape)
    g = np.zeros(shape)
    trace = []
    for eps in schedule:
        f, g, row = _sinkhorn_level(f, g, log_a, log_b, a, half_sq / eps, eps, tol, max_iter)
        trace.append(row)
        if row["marginal_error"] > tol:
            raise SolverError(
                f"Sinkhorn stalled at epsilon={eps}: marginal error "
                f"{row['marginal_error']:.3e} after {row['iterations']} iterations",
                trace=trace,
            )
    return EntropicGrid(radius, points, schedule[-1], g, log_b, source=V, target=W, f=f, trace=trace)

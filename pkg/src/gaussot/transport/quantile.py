"""One-dimensional monotone transport ``T = G^{-1} o F``."""
from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, DomainError, SolverError
from .base import TransportMap

KNOTS = 2048
RADIUS = 8.0
THIRD_STEP = 1e-3

_SCAN_SPAN = 16.0
_MAX_SPAN = 4096.0
_SCAN_CELLS = 3000
_LOG_DROP = 700.0
_GL_T, _GL_W = np.polynomial.legendre.leggauss(8)


def _log_density(V, x):
    """Unnormalized Lebesgue log-density of ``e^{-V} gamma``."""
    with np.errstate(over="ignore", invalid="ignore"):
        return -V.value(x[:, None]) - 0.5 * x * x


class Cdf:
    """Distribution function of ``e^{-V} gamma`` on a fine cell partition.

    Lower and upper tail masses are accumulated separately so that both
    tails keep full relative precision.
    """

    def __init__(self, V):
        span = _SCAN_SPAN
        while True:
            scan = np.linspace(-span, span, 2 * _SCAN_CELLS + 1)
            lf = _log_density(V, scan)
            lf = np.where(np.isfinite(lf), lf, -np.inf)
            top = float(lf.max())
            if not np.isfinite(top):
                raise SolverError("density is not finite anywhere on the scan window")
            keep = np.flatnonzero(lf >= top - _LOG_DROP)
            if keep[0] > 0 and keep[-1] < len(scan) - 1:
                break
            span *= 2
            if span > _MAX_SPAN:
                raise SolverError("density does not decay within the scan window")
        step = scan[1] - scan[0]
        self.V = V
        self.edges = np.arange(scan[keep[0]] - step, scan[keep[-1]] + 1.5 * step, step)
        self.step = step
        self._shift = top
        masses = self._integral(self.edges[:-1], self.edges[1:])
        total = math.fsum(masses)
        self.log_norm = top + math.log(total)
        self.masses = masses / total
        self.left = np.concatenate([[0.0], np.cumsum(self.masses)])
        self.right = np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])

    def _integral(self, a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL_T[None, :]
        vals = np.exp(_log_density(self.V, nodes.ravel()).reshape(nodes.shape) - self._shift)
        return half * (vals @ _GL_W)

    def logpdf(self, x):
        return _log_density(self.V, np.asarray(x, dtype=float)) - self.log_norm

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def _cell(self, x):
        return np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.masses) - 1)

    def lower(self, x):
        i = self._cell(x)
        part = self._integral(self.edges[i], x) * math.exp(self._shift - self.log_norm)
        return np.maximum(self.left[i] + part, 0.0)

    def upper(self, x):
        i = self._cell(x)
        part = self._integral(x, self.edges[i + 1]) * math.exp(self._shift - self.log_norm)
        return np.maximum(self.right[i + 1] + part, 0.0)

    def inverse(self, p, s):
        """Solve ``F(y) = p`` (lower branch) or ``1 - F(y) = s`` (upper branch).

        The branch with the smaller tail mass is used pointwise. Bracketing
        bisection to ``1e-12`` is followed by two Newton steps.
        """
        p = np.asarray(p, dtype=float)
        s = np.asarray(s, dtype=float)
        use_low = p <= s
        target = np.where(use_low, p, s)
        if np.any(target <= 0):
            raise SolverError("quantile lies beyond the resolvable tail of the target")
        j_low = np.searchsorted(self.left, p, side="left") - 1
        j_up = len(self.masses) - np.searchsorted(self.right[::-1], s, side="left")
        j = np.clip(np.where(use_low, j_low, j_up), 0, len(self.masses) - 1)
        lo, hi = self.edges[j].copy(), self.edges[j + 1].copy()

        def resid(y):
            return np.where(use_low, self.lower(y) - p, s - self.upper(y))

        while np.max(hi - lo) > 1e-12:
            mid = 0.5 * (lo + hi)
            r = resid(mid)
            go_right = r < 0
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
            if np.all(hi - lo <= 1e-12):
                break
        y = 0.5 * (lo + hi)
        for _ in range(2):
            g = self.pdf(y)
            if np.any(~np.isfinite(g)) or np.any(g <= 0):
                raise SolverError("target density vanishes at a needed point (tail underflow)")
            y = y - resid(y) / g
        return y


def _monotone_slopes(x, y, s):
    """Limit Hermite slopes so the cubic interpolant stays increasing."""
    s = s.copy()
    delta = np.diff(y) / np.diff(x)
    a = s[:-1] / delta
    b = s[1:] / delta
    r = np.hypot(a, b)
    scale = np.where(r > 3.0, 3.0 / r, 1.0)
    s[:-1] = np.minimum(s[:-1], scale * a * delta)
    s[1:] = np.minimum(s[1:], scale * b * delta)
    return s


class Quantile1D(TransportMap):
    """Tabulated monotone map on ``[-R, R]`` with affine tails.

    The Jacobian is the density ratio ``T'(x) = f(x) / g(T(x))`` evaluated
    with the exact potentials; values come from cubic Hermite interpolation.
    """

    backend = "quantile1d"
    supports_third = True

    def __init__(self, knots, values, slopes, source, target, log_norm_src, log_norm_tgt):
        super().__init__(1, source, target)
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        self.radius = float(self.knots[-1])
        self.log_norm_src = float(log_norm_src)
        self.log_norm_tgt = float(log_norm_tgt)
        if np.any(np.diff(self.values) <= 0):
            raise SolverError("tabulated quantile map is not strictly increasing")
        self._islopes = _monotone_slopes(self.knots, self.values, self.slopes)

    def _check_domain(self, pts, extrapolate):
        if not extrapolate and np.any(np.abs(pts) > self.radius):
            bad = pts[np.abs(pts[:, 0]) > self.radius][0, 0]
            raise DomainError(f"probe {bad!r} outside the tabulated range [-{self.radius}, {self.radius}]")

    def _interp(self, x):
        k = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 2)
        x0, x1 = self.knots[k], self.knots[k + 1]
        h = x1 - x0
        t = (x - x0) / h
        y0, y1 = self.values[k], self.values[k + 1]
        m0, m1 = self._islopes[k] * h, self._islopes[k + 1] * h
        t2, t3 = t * t, t * t * t
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1

    def _value(self, pts):
        x = pts[:, 0]
        R = self.radius
        out = self._interp(np.clip(x, -R, R))
        lo, hi = x < -R, x > R
        out = np.where(lo, self.values[0] + self.slopes[0] * (x + R), out)
        out = np.where(hi, self.values[-1] + self.slopes[-1] * (x - R), out)
        return out[:, None]

    def slope(self, x):
        """``T'(x)`` from the density ratio ``f(x) / g(T(x))``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return float(self.slope(x[None])[0])
        R = self.radius
        xc = np.clip(x, -R, R)
        T = self._value(xc[:, None])[:, 0]
        log_f = _log_density(self.source, xc) - self.log_norm_src
        log_g = _log_density(self.target, T) - self.log_norm_tgt
        out = np.exp(log_f - log_g)
        out = np.where(x < -R, self.slopes[0], out)
        return np.where(x > R, self.slopes[-1], out)

    def spline_slope(self, x):
        """Derivative of the interpolant itself (independent of the density ratio)."""
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 2)
        x0, x1 = self.knots[k], self.knots[k + 1]
        h = x1 - x0
        t = (x - x0) / h
        y0, y1 = self.values[k], self.values[k + 1]
        m0, m1 = self._islopes[k] * h, self._islopes[k + 1] * h
        t2 = t * t
        d = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1
        return d / h

    def _jacobian(self, pts):
        return self.slope(pts[:, 0])[:, None, None]

    def _third(self, pts, a):
        x = pts[:, 0]
        d = (self.slope(x + THIRD_STEP) - self.slope(x - THIRD_STEP)) / (2 * THIRD_STEP)
        return (a[0] * d)[:, None, None]


def solve_quantile_1d(V, W, q=None, knots=KNOTS, radius=RADIUS) -> Quantile1D:
    """Monotone rearrangement pushing ``e^{-V} gamma`` to ``e^{-W} gamma`` in 1D.

    Parameters
    ----------
    V, W : Potential
        One-dimensional source and target potentials. They need not be
        normalized; the distribution functions are normalized internally.
    q : QuadratureRule, optional
        If given, the pushforward discrepancy on the test battery is recorded
        in ``T.diagnostics``.

    Raises
    ------
    SolverError
        If either density fails to decay or the target density underflows
        where a quantile is needed.
    """
    if V.dim != 1 or W.dim != 1:
        raise DimensionError("the quantile solver is one-dimensional")
    src, tgt = Cdf(V), Cdf(W)
    x = np.linspace(-radius, radius, knots)
    p, s = src.lower(x), src.upper(x)
    y = tgt.inverse(p, s)
    slopes = np.exp(src.logpdf(x) - tgt.logpdf(y))
    if not np.all(np.isfinite(slopes)) or np.any(slopes <= 0):
        raise SolverError("non-finite density ratio on the quantile table")
    T = Quantile1D(x, y, slopes, V, W, src.log_norm, tgt.log_norm)
    T.diagnostics = {}
    if q is not None:
        from . import pushforward_check

        T.diagnostics["pushforward"] = pushforward_check(T, V, W, q)
    return T

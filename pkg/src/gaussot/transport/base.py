"""Transport map representations ``T(x) = x + grad phi(x)``."""
from __future__ import annotations

import numpy as np

from ..errors import ConvexityError, DimensionError, UnsupportedBackendError
from ..potentials import as_points

CONVEXITY_TOL = 1e-6


def sym_sqrt(S: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Symmetric (inverse) square root of a batch of SPD matrices via ``eigh``."""
    lam, Q = np.linalg.eigh(S)
    if np.any(lam <= 0):
        raise ConvexityError(f"matrix is not positive definite (min eigenvalue {lam.min():.3e})")
    r = lam ** (-0.5 if inverse else 0.5)
    return (Q * r[..., None, :]) @ np.swapaxes(Q, -1, -2)


class TransportMap:
    """Base class; subclasses implement the ``_value``/``_jacobian``/``_third`` kernels.

    Points follow the potentials convention: ``(d,)`` or ``(n, d)``.
    """

    backend = "abstract"
    supports_third = False

    def __init__(self, dim, source=None, target=None):
        self.dim = int(dim)
        self.source = source
        self.target = target

    # -- public API ------------------------------------------------------
    def value(self, x, extrapolate=False):
        pts, single = as_points(x, self.dim)
        self._check_domain(pts, extrapolate)
        out = self._value(pts)
        return out[0] if single else out

    def phi_grad(self, x, extrapolate=False):
        pts, single = as_points(x, self.dim)
        out = self.value(pts, extrapolate=extrapolate) - pts
        return out[0] if single else out

    def raw_jacobian(self, x, extrapolate=False):
        """Jacobian before symmetrization (used to measure asymmetry)."""
        pts, single = as_points(x, self.dim)
        self._check_domain(pts, extrapolate)
        out = self._jacobian(pts)
        return out[0] if single else out

    def jacobian(self, x, extrapolate=False, check=True):
        """``I + hess phi`` at ``x``, symmetrized.

        Raises
        ------
        ConvexityError
            If ``check`` and some eigenvalue is below ``-1e-6``.
        """
        pts, single = as_points(x, self.dim)
        J = self.raw_jacobian(pts, extrapolate=extrapolate)
        J = 0.5 * (J + np.swapaxes(J, -1, -2))
        if check:
            lam = np.linalg.eigvalsh(J)[:, 0]
            if lam.min() < -CONVEXITY_TOL:
                i = int(np.argmin(lam))
                raise ConvexityError(
                    f"{self.backend} map Jacobian has eigenvalue {lam[i]:.3e} at {pts[i].tolist()}"
                )
        return J[0] if single else J

    def third_derivative(self, x, a, extrapolate=False):
        """Directional derivative ``D_a hess phi`` as symmetric ``(d, d)`` matrices."""
        if not self.supports_third:
            raise UnsupportedBackendError(
                f"third derivatives are not available for the {self.backend} backend"
            )
        pts, single = as_points(x, self.dim)
        self._check_domain(pts, extrapolate)
        a = np.asarray(a, dtype=float).reshape(self.dim)
        out = self._third(pts, a)
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out[0] if single else out

    def __call__(self, x):
        return self.value(x)

    # -- kernels ---------------------------------------------------------
    def _check_domain(self, pts, extrapolate):
        pass

    def _value(self, pts):
        raise NotImplementedError

    def _jacobian(self, pts):
        raise NotImplementedError

    def _third(self, pts, a):
        raise NotImplementedError


class Identity(TransportMap):
    backend = "identity"
    supports_third = True

    def _value(self, pts):
        return pts.copy()

    def _jacobian(self, pts):
        return np.broadcast_to(np.eye(self.dim), (len(pts), self.dim, self.dim)).copy()

    def _third(self, pts, a):
        return np.zeros((len(pts), self.dim, self.dim))


class Linear(TransportMap):
    """Affine map ``T(x) = M x + m`` with ``M`` symmetric positive definite."""

    backend = "linear"
    supports_third = True

    def __init__(self, M, m=None, source=None, target=None):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        super().__init__(M.shape[0], source, target)
        if M.shape != (self.dim, self.dim):
            raise DimensionError(f"M must be square, got {M.shape}")
        self.M = 0.5 * (M + M.T)
        self.m = np.zeros(self.dim) if m is None else np.asarray(m, dtype=float).reshape(self.dim)
        lam = np.linalg.eigvalsh(self.M)
        if lam[0] <= 0:
            raise ConvexityError(f"linear map matrix is not positive definite (min eigenvalue {lam[0]:.3e})")

    def _value(self, pts):
        return pts @ self.M + self.m

    def _jacobian(self, pts):
        return np.broadcast_to(self.M, (len(pts), self.dim, self.dim)).copy()

    def _third(self, pts, a):
        return np.zeros((len(pts), self.dim, self.dim))


class Product(TransportMap):
    """Coordinatewise product of one-dimensional maps."""

    backend = "product"

    def __init__(self, components, source=None, target=None):
        components = tuple(components)
        for c in components:
            if c.dim != 1:
                raise DimensionError("product map components must be one-dimensional")
        super().__init__(len(components), source, target)
        self.components = components
        self.supports_third = all(c.supports_third for c in components)

    def _check_domain(self, pts, extrapolate):
        for i, c in enumerate(self.components):
            c._check_domain(pts[:, i : i + 1], extrapolate)

    def _value(self, pts):
        return np.concatenate(
            [c._value(pts[:, i : i + 1]) for i, c in enumerate(self.components)], axis=1
        )

    def _jacobian(self, pts):
        diag = np.stack(
            [c._jacobian(pts[:, i : i + 1])[:, 0, 0] for i, c in enumerate(self.components)],
            axis=-1,
        )
        out = np.zeros((len(pts), self.dim, self.dim))
        idx = np.arange(self.dim)
        out[:, idx, idx] = diag
        return out

    def _third(self, pts, a):
        out = np.zeros((len(pts), self.dim, self.dim))
        for i, c in enumerate(self.components):
            if a[i] != 0.0:
                out[:, i, i] = a[i] * c._third(pts[:, i : i + 1], np.ones(1))[:, 0, 0]
        return out

"""Numerical checks of two symmetric-matrix lemmas.

``lemma41_check`` compares ``||A^{-1/2} B A^{-1/2}||_HS`` with
``||B||_HS / ||A||_op``. ``lemma42_lhs`` and ``lemma42_rhs`` are the two
sides of the exact identity

    -log det2((I+A)(I+B)^{-1})
        = int_0^1 (1-t) ||(I+(1-t)B+tA)^{-1/2} (A-B) (I+(1-t)B+tA)^{-1/2}||_HS^2 dt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvexityError, DimensionError
from .functionals import log_det2
from .quadrature import gauss_legendre_unit
from .transport.base import sym_sqrt

__all__ = [
    "SymmetricMatrixPair",
    "lemma41_check",
    "lemma42_lhs",
    "lemma42_rhs",
    "random_spd",
    "random_symmetric",
    "random_pair",
    "check_suite",
]

MAX_DIM = 16
PD_TOL = 1e-10


def _sym(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    if M.shape[0] > MAX_DIM:
        raise DimensionError(f"{name} has dimension {M.shape[0]} > {MAX_DIM}")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (M + M.T)


def _min_eig(M):
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True)
class SymmetricMatrixPair:
    A: np.ndarray
    B: np.ndarray
    A_spd: bool
    IA_pd: bool
    IB_pd: bool

    @classmethod
    def build(cls, A, B):
        A, B = _sym(A, "A"), _sym(B, "B")
        if A.shape != B.shape:
            raise DimensionError(f"A is {A.shape} but B is {B.shape}")
        eye = np.eye(len(A))
        return cls(A, B, _min_eig(A) > PD_TOL, _min_eig(eye + A) > PD_TOL, _min_eig(eye + B) > PD_TOL)

    @property
    def dim(self):
        return len(self.A)


def _hs(M):
    return math.sqrt(float(np.sum(M * M)))


def lemma41_check(A, B):
    """Return ``{"lhs", "rhs", "holds"}`` for ``||A^{-1/2}BA^{-1/2}||_HS >= ||B||_HS/||A||_op``."""
    A, B = _sym(A, "A"), _sym(B, "B")
    if _min_eig(A) <= PD_TOL:
        raise ConvexityError("A must be positive definite")
    R = sym_sqrt(A, inverse=True)
    lhs = _hs(R @ B @ R)
    rhs = _hs(B) / float(np.abs(np.linalg.eigvalsh(A)).max())
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs >= rhs - 1e-10)}


def _check_pd(A, B):
    A, B = _sym(A, "A"), _sym(B, "B")
    eye = np.eye(len(A))
    for name, M in (("I+A", eye + A), ("I+B", eye + B)):
        if _min_eig(M) <= PD_TOL:
            raise ConvexityError(f"{name} must be positive definite")
    return A, B, eye


def lemma42_lhs(A, B, split=True):
    """``-log det2((I+A)(I+B)^{-1})``.

    With ``split`` (default) the trace part is ``<B-A, (I+B)^{-1}>_HS`` and the
    determinant comes from the symmetric congruence
    ``(I+B)^{-1/2}(I+A)(I+B)^{-1/2}``. Otherwise the nonsymmetric product is
    passed to ``log_det2`` directly.
    """
    A, B, eye = _check_pd(A, B)
    if not split:
        return -log_det2((eye + A) @ np.linalg.inv(eye + B), symmetric=False)
    Rb = sym_sqrt(eye + B, inverse=True)
    trace = float(np.sum((B - A) * (Rb @ Rb)))
    sign, logdet = np.linalg.slogdet(Rb @ (eye + A) @ Rb)
    if sign <= 0:
        raise ConvexityError("congruence lost positivity")
    return -(trace + logdet)


def _panel(A, B, D, eye, lo, hi, ts, ws):
    terms = []
    for t0, w0 in zip(ts, ws):
        t = lo + (hi - lo) * t0
        M = eye + (1 - t) * B + t * A
        lam, Q = np.linalg.eigh(M)
        if lam[0] <= PD_TOL:
            raise ConvexityError(f"I + (1-t)B + tA loses positivity at t = {t:.6g}")
        R = (Q / np.sqrt(lam)) @ Q.T
        terms.append((hi - lo) * w0 * (1 - t) * float(np.sum((R @ D @ R) ** 2)))
    return math.fsum(terms)


def lemma42_rhs(A, B, t_order=32, panels="auto", rtol=1e-14, max_depth=10):
    """Gauss-Legendre value of the ``t``-integral, one eigendecomposition per node.

    Parameters
    ----------
    t_order : int
        Nodes per panel.
    panels : int or "auto"
        A fixed number of equal panels, or ``"auto"`` to bisect panels until
        a panel and its two halves agree to ``rtol`` (relative to the total).
        When ``I+A`` and ``I+B`` have very different spectra the integrand has
        a pole just outside ``[0, 1]`` and a single panel converges slowly.
    """
    A, B, eye = _check_pd(A, B)
    D = A - B
    ts, ws = gauss_legendre_unit(t_order)
    if panels != "auto":
        edges = np.linspace(0.0, 1.0, int(panels) + 1)
        return math.fsum(_panel(A, B, D, eye, a, b, ts, ws) for a, b in zip(edges[:-1], edges[1:]))
    whole = _panel(A, B, D, eye, 0.0, 1.0, ts, ws)
    scale = max(abs(whole), 1e-300)
    stack = [(0.0, 1.0, whole, 0)]
    done = []
    while stack:
        a, b, est, depth = stack.pop()
        m = 0.5 * (a + b)
        left, right = _panel(A, B, D, eye, a, m, ts, ws), _panel(A, B, D, eye, m, b, ts, ws)
        if abs(left + right - est) <= rtol * scale or depth >= max_depth:
            done.append(left + right)
        else:
            stack += [(a, m, left, depth + 1), (m, b, right, depth + 1)]
    return math.fsum(done)


# -- Random generation --------------------------------------------------------

def random_symmetric(rng, d, scale=1.0):
    G = rng.standard_normal((d, d))
    return scale * 0.5 * (G + G.T)


def random_spd(rng, d, low=0.1, high=4.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = rng.uniform(low, high, size=d)
    return (Q * lam) @ Q.T


def random_pair(rng, d):
    """``A`` and ``B`` with ``I+A`` and ``I+B`` having spectra in ``[0.1, 4]``."""
    eye = np.eye(d)
    return random_spd(rng, d) - eye, random_spd(rng, d) - eye


def check_suite(count=1000, seed=0, dims=range(1, 9), t_order=32):
    """Run both lemmas over ``count`` seeded pairs; return a summary dict."""
    rng = np.random.Generator(np.random.Philox(seed))
    dims = list(dims)
    worst42 = 0.0
    worst42_dim = None
    violations41 = 0
    worst41 = math.inf
    for i in range(count):
        d = dims[i % len(dims)]
        A, B = random_pair(rng, d)
        gap = float(abs(lemma42_lhs(A, B) - lemma42_rhs(A, B, t_order)))
        if gap > worst42:
            worst42, worst42_dim = gap, d
        r = lemma41_check(random_spd(rng, d), random_symmetric(rng, d))
        violations41 += not r["holds"]
        worst41 = min(worst41, float(r["lhs"] - r["rhs"]))
    return {
        "pairs": count,
        "lemma42_worst_residual": worst42,
        "lemma42_worst_dim": worst42_dim,
        "lemma42_pass": bool(worst42 <= 1e-8),
        "lemma41_violations": violations41,
        "lemma41_min_margin": worst41,
        "lemma41_pass": violations41 == 0,
    }

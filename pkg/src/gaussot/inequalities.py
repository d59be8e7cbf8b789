"""Assemble functionals into verdicts for the identities and inequalities.

Every report keeps its two sides as signed sums of itemized sub-integrals,
so ``lhs`` and ``rhs`` can be re-summed from ``items`` exactly. ``slack`` is
oriented so that a positive value means the statement is satisfied:

* ``sense="ge"``: statement ``lhs >= rhs``, ``slack = lhs - rhs``;
* ``sense="le"``: statement ``lhs <= rhs``, ``slack = rhs - lhs``;
* ``sense="eq"``: identity ``lhs == rhs``, ``slack = |lhs - rhs|``.

The tolerance is ``max(floor, 1e3 * max_i |coef_i| * trunc_i)`` so that no
verdict hinges on quadrature noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import functionals as F
from .errors import PreconditionError, UnsupportedBackendError
from .functionals import FunctionalValue, _fv
from .potentials import FunctionField, Quadratic, as_quadratic, default_cloud, estimate_semiconvexity
from .quadrature import gauss_legendre_unit, integrate_weighted
from .transport.base import sym_sqrt

__all__ = [
    "Item",
    "InequalityReport",
    "verify_identity_thm21",
    "verify_cor22",
    "verify_thm23",
    "verify_thm24",
    "verify_thm25",
    "verify_thm26",
    "verify_talagrand",
    "verify_poincare",
    "verify_ma_residual",
    "default_battery",
    "lp_exponent",
]

TOL_FLOOR = 1e-6
TRUNC_FACTOR = 1e3
T_ORDER = 32


@dataclass(frozen=True)
class Item:
    name: str
    side: str
    coef: float
    value: FunctionalValue

    @property
    def contribution(self):
        return self.coef * self.value.value

    def as_dict(self):
        return {"name": self.name, "side": self.side, "coef": self.coef,
                "value": self.value.value, "order": self.value.order,
                "trunc_error": self.value.trunc_error}


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    verdict: str
    sense: str
    items: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.verdict in ("holds", "identity-ok")

    def items_by_name(self):
        return {it.name: it for it in self.items}

    def as_dict(self):
        return {
            "name": self.name,
            "sense": self.sense,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "items": [it.as_dict() for it in self.items],
            "diagnostics": self.diagnostics,
        }


def _assemble(name, sense, items, floor=TOL_FLOOR, diagnostics=None, extra_ok=True):
    lhs = math.fsum(it.contribution for it in items if it.side == "lhs")
    rhs = math.fsum(it.contribution for it in items if it.side == "rhs")
    trunc = max((abs(it.coef) * it.value.trunc_error for it in items), default=0.0)
    tol = max(floor, TRUNC_FACTOR * trunc)
    if sense == "eq":
        slack = abs(lhs - rhs)
        verdict = "identity-ok" if slack <= tol and extra_ok else "identity-broken"
    else:
        slack = lhs - rhs if sense == "ge" else rhs - lhs
        verdict = "holds" if slack >= -tol and extra_ok else "violated"
    return InequalityReport(name, lhs, rhs, slack, tol, verdict, sense, list(items), diagnostics or {})


def _const(name, value):
    return FunctionalValue(name, float(value), 0, 0.0)


def _check_c(c, lower_strict=False):
    c = float(c)
    if lower_strict:
        if not c > 0:
            raise PreconditionError(f"c must be > 0, got {c}")
    elif not 0.0 <= c < 1.0:
        raise PreconditionError(f"c must lie in [0, 1), got {c}")
    return c


def _check_semiconvex(W, c, seed=0):
    c_star = estimate_semiconvexity(W, default_cloud(W.dim, seed))
    if c_star > c + 1e-8:
        raise PreconditionError(f"hess W >= -c Id fails: sampled c* = {c_star:.6g} > c = {c}")
    return c_star


def lp_exponent(p):
    """Hoelder conjugate exponent ``2p / (2 - p)`` for ``1 <= p < 2``."""
    p = float(p)
    if not 1.0 <= p < 2.0:
        raise PreconditionError(f"p must lie in [1, 2), got {p}")
    r = 2.0 * p / (2.0 - p)
    if not math.isfinite(r) or r > 1e6:
        raise PreconditionError(f"exponent 2p/(2-p) = {r} is not usable for p = {p}")
    return r


def _lp_sq(name, q, V, g, p):
    """``||g||_{L^p(e^{-V} gamma)}^2`` for a pointwise nonnegative ``g``."""
    inner = _fv(name, q, V, lambda x: np.abs(g(x)) ** p)
    fine = integrate_weighted(q.refined(F.REFINE), lambda x: np.abs(g(x)) ** p, V)
    val = inner.value ** (2.0 / p)
    return FunctionalValue(name, val, q.order, abs(val - max(fine, 0.0) ** (2.0 / p)))


def _op_norm(J):
    return np.abs(np.linalg.eigvalsh(J)).max(axis=-1)


# -- Inequality checks --------------------------------------------------------

def verify_identity_thm21(V1, V2, W1, W2, T1, T2, q, t_order=T_ORDER, floor=1e-4):
    """Entropy-difference identity for two transport problems with reference ``gamma``.

    ``T_i`` pushes ``e^{-V_i} gamma`` to ``e^{-W_i} gamma``. Both sides are
    computed independently; the ``t``-integral uses Gauss-Legendre on [0, 1].
    """
    ts, tw = gauss_legendre_unit(t_order)
    d = T1.dim

    def J(T, x):
        return T.jacobian(x, extrapolate=True)

    def cross(x):
        v = T1.value(x, extrapolate=True) - T2.value(x, extrapolate=True)
        return np.einsum("ij,ij->i", v, (W1.grad(T2.value(x, extrapolate=True)) - W2.grad(T2.value(x, extrapolate=True))))

    def logdet(x):
        R = sym_sqrt(J(T2, x), inverse=True)
        return F._log_det2_sym(R @ J(T1, x) @ R)

    def interp(x):
        a, b = T1.value(x, extrapolate=True), T2.value(x, extrapolate=True)
        v = a - b
        out = np.zeros(len(x))
        for t, w in zip(ts, tw):
            H = W1.hessian((1 - t) * b + t * a) + np.eye(d)
            out += w * (1 - t) * np.einsum("ni,nij,nj->n", v, H, v)
        return out

    items = [
        Item("ent_h", "lhs", 1.0, _fv("ent_h", q, V2, lambda x: V1.value(x) - V2.value(x))),
        Item("ent_f", "lhs", -1.0, _fv("ent_f", q, W2, lambda x: W1.value(x) - W2.value(x))),
        Item("cross", "rhs", 1.0, _fv("cross", q, V2, cross)),
        Item("log_det2_rel", "rhs", -1.0, _fv("log_det2_rel", q, V2, logdet)),
        Item("interp", "rhs", 1.0, _fv("interp", q, V2, interp)),
    ]
    return _assemble("thm21", "eq", items, floor=max(floor, 1e-4), diagnostics={"t_order": t_order})


def verify_cor22(V1, V2, W1, W2, T1, T2, c, q, floor=TOL_FLOOR, targets_equal=None, seed=0):
    """Stability of maps under perturbation, with ``I + hess W1 >= c Id``.

    ``lhs = (4/c)(Ent_h - Ent_f) + (4/c^2) int |grad(W1 - W2)|^2 e^{-W2}``,
    ``rhs = int |T1 - T2|^2 e^{-V2}``. When the targets coincide the sharper
    ``(c/2) rhs <= Ent_h`` is evaluated too and must hold as well.
    """
    c = _check_c(c, lower_strict=True)
    _check_uniform_convexity(W1, c, seed)
    ent_h = _fv("ent_h", q, V2, lambda x: V1.value(x) - V2.value(x))
    ent_f = _fv("ent_f", q, W2, lambda x: W1.value(x) - W2.value(x))
    grad_sq = _fv("grad_sq", q, W2, lambda x: np.sum((W1.grad(x) - W2.grad(x)) ** 2, axis=1))
    dist = _fv("map_dist", q, V2, lambda x: np.sum((T1.value(x, extrapolate=True) - T2.value(x, extrapolate=True)) ** 2, axis=1))
    items = [
        Item("ent_h", "lhs", 4.0 / c, ent_h),
        Item("ent_f", "lhs", -4.0 / c, ent_f),
        Item("grad_sq", "lhs", 4.0 / c**2, grad_sq),
        Item("map_dist", "rhs", 1.0, dist),
    ]
    if targets_equal is None:
        targets_equal = W1 is W2
    diagnostics = {"c": c, "targets_equal": bool(targets_equal)}
    extra_ok = True
    if targets_equal:
        ref = _assemble("cor22-refined", "le", [Item("map_dist", "lhs", c / 2, dist), Item("ent_h", "rhs", 1.0, ent_h)], floor=floor)
        diagnostics.update(refined_lhs=ref.lhs, refined_rhs=ref.rhs, refined_slack=ref.slack, refined_verdict=ref.verdict)
        extra_ok = ref.ok
    return _assemble("cor22", "ge", items, floor=floor, diagnostics=diagnostics, extra_ok=extra_ok)


def _check_uniform_convexity(W, c, seed=0):
    """Require ``min eig(I + hess W) >= c`` on the reference cloud (exact for quadratics)."""
    quad = as_quadratic(W)
    if quad is not None:
        lam = float(np.linalg.eigvalsh(np.eye(W.dim) + quad[0])[0])
    else:
        H = W.hessian(default_cloud(W.dim, seed)) + np.eye(W.dim)
        lam = float(np.linalg.eigvalsh(H)[:, 0].min())
    if lam < c - 1e-8:
        raise PreconditionError(f"I + hess W >= c Id fails: smallest eigenvalue {lam:.6g} < c = {c}")
    return lam


def _require_third(T):
    if not T.supports_third:
        raise UnsupportedBackendError(f"backend {T.backend} has no third derivatives")


def _thm23_items(V, W, T, q):
    _require_third(T)
    return [
        Item("fisher_V", "lhs", 1.0, F.fisher_information(V, q)),
        Item("fisher_W", "lhs", -1.0, F.fisher_information(W, q)),
        Item("ent_V", "rhs", 2.0, F.relative_entropy(V, q)),
        Item("ent_W", "rhs", -2.0, F.relative_entropy(W, q)),
        Item("log_det2", "rhs", -2.0, F.log_det2_map(T, V, q)),
        Item("sandwich", "rhs", 1.0, F.sandwich_integral(T, V, q)),
        Item("hs_phi", "rhs", 1.0, F.hs_phi(T, V, q)),
        Item("cross_hs", "rhs", 2.0, F.cross_hs(T, W, V, q)),
        Item("nw", "rhs", 1.0, F.nw_integral(T, W, V, q)),
    ]


def verify_thm23(V, W, T, q, floor=TOL_FLOOR):
    """Fisher-information lower bound with all higher-order terms.

    ``N_W`` uses ``u_a = D_a grad phi``; the variant with ``a + D_a grad phi``
    is reported in ``diagnostics`` only.
    """
    items = _thm23_items(V, W, T, q)
    rep = _assemble("thm23", "ge", items, floor=floor)
    nw_Phi = F.nw_integral(T, W, V, q, form="Phi")
    nw = rep.items_by_name()["nw"].value.value
    rep.diagnostics.update(nw_Phi=nw_Phi.value, rhs_Phi=rep.rhs - nw + nw_Phi.value,
                           slack_Phi=rep.lhs - (rep.rhs - nw + nw_Phi.value))
    return rep


def verify_thm24(V, W, T, c, q, floor=TOL_FLOOR, seed=0):
    """Dimension-free Sobolev-type inequality under ``hess W >= -c Id``."""
    c = _check_c(c)
    _check_semiconvex(W, c, seed)
    items = [
        Item("fisher_V", "lhs", 1.0, F.fisher_information(V, q)),
        Item("fisher_W", "lhs", -1.0, F.fisher_information(W, q)),
        Item("hess_W", "lhs", 2.0 / (1.0 - c), F.hessian_energy(W, q)),
        Item("ent_V", "rhs", 2.0, F.relative_entropy(V, q)),
        Item("ent_W", "rhs", -2.0, F.relative_entropy(W, q)),
        Item("hs_phi", "rhs", (1.0 - c) / 2.0, F.hs_phi(T, V, q)),
    ]
    return _assemble("thm24", "ge", items, floor=floor, diagnostics={"c": c})


def verify_thm25(V, W, T, c, p, q, floor=TOL_FLOOR, seed=0):
    """Third-derivative bound ``||grad^3 phi||_{L^p}^2 <= ||op(J)||_{L^r}^2 (...)``."""
    _require_third(T)
    c = _check_c(c)
    r = lp_exponent(p)
    _check_semiconvex(W, c, seed)
    lhs = _lp_sq("third_Lp_sq", q, V, lambda x: np.sqrt(F.third_hs_sq(T, x, extrapolate=True)), p)
    opn = _lp_sq("op_Lr_sq", q, V, lambda x: _op_norm(T.jacobian(x, extrapolate=True)), r)
    fisher = F.fisher_information(V, q)
    hess = F.hessian_energy(W, q)
    bracket = fisher.value + 2.0 / (1.0 - c) * hess.value
    bracket_err = fisher.trunc_error + 2.0 / (1.0 - c) * hess.trunc_error
    prod = FunctionalValue(
        "rhs_product", opn.value * bracket, q.order,
        opn.trunc_error * abs(bracket) + abs(opn.value) * bracket_err,
    )
    items = [Item("third_Lp_sq", "lhs", 1.0, lhs), Item("rhs_product", "rhs", 1.0, prod)]
    diag = {"c": c, "p": float(p), "r": r, "op_Lr_sq": opn.value, "fisher_V": fisher.value, "hess_W": hess.value}
    return _assemble("thm25", "le", items, floor=floor, diagnostics=diag)


def verify_thm26(pair1, pair2, c, p, q, variant="base", floor=TOL_FLOOR, seed=0):
    """Sobolev stability of Hessians of transport potentials.

    ``pair_i = (V_i, W_i, T_i)``. ``variant="base"`` weights the V-difference
    term by 2, ``variant="thm29"`` by 3.
    """
    kappa = {"base": 2.0, "thm29": 3.0}.get(variant)
    if kappa is None:
        raise PreconditionError(f"variant must be 'base' or 'thm29', got {variant!r}")
    c = _check_c(c)
    r = lp_exponent(p)
    (V1, W1, T1), (V2, W2, T2) = pair1, pair2
    _check_semiconvex(W1, c, seed)

    def hdiff(x):
        D = T1.jacobian(x, extrapolate=True) - T2.jacobian(x, extrapolate=True)
        return np.sqrt(np.einsum("nij,nij->n", D, D))

    lhs = _lp_sq("hess_diff_Lp_sq", q, V2, hdiff, p)
    m1 = _lp_sq("op1_Lr_sq", q, V2, lambda x: _op_norm(T1.jacobian(x, extrapolate=True)), r)
    m2 = _lp_sq("op2_Lr_sq", q, V2, lambda x: _op_norm(T2.jacobian(x, extrapolate=True)), r)
    M = m1 if m1.value >= m2.value else m2
    dv = _fv("dV", q, V2, lambda x: V1.value(x) - V2.value(x))
    dg = _fv("grad_dW_sq", q, W2, lambda x: np.sum((W1.grad(x) - W2.grad(x)) ** 2, axis=1))
    bracket = kappa * dv.value + 2.0 / (1.0 - c) * dg.value
    bracket_err = kappa * dv.trunc_error + 2.0 / (1.0 - c) * dg.trunc_error
    prod = FunctionalValue(
        "rhs_product", 2.0 * M.value * bracket, q.order,
        2.0 * (M.trunc_error * abs(bracket) + M.value * bracket_err),
    )
    items = [Item("hess_diff_Lp_sq", "lhs", 1.0, lhs), Item("rhs_product", "rhs", 1.0, prod)]
    diag = {"c": c, "p": float(p), "r": r, "variant": variant, "kappa": kappa,
            "M": M.value, "M1": m1.value, "M2": m2.value, "dV": dv.value, "grad_dW_sq": dg.value}
    return _assemble("thm26" if variant == "base" else "thm29", "le", items, floor=floor, diagnostics=diag)


def verify_talagrand(V, T, q, floor=TOL_FLOOR):
    """``W2^2(gamma, e^{-V} gamma) <= 2 Ent_gamma(e^{-V})`` via the map from ``gamma``."""
    source = T.source if T.source is not None else Quadratic(np.zeros((V.dim, V.dim)))
    items = [
        Item("ent_V", "lhs", 2.0, F.relative_entropy(V, q)),
        Item("w2_sq", "rhs", 1.0, F.w2_cost_from_map(T, source, q)),
    ]
    return _assemble("talagrand", "ge", items, floor=floor)


def default_battery(dim):
    """Smooth test fields for the spectral-gap check."""
    u = np.ones(dim) / math.sqrt(dim)
    fields = [
        FunctionField(dim, lambda x: np.ones(len(x)), lambda x: np.zeros_like(x), name="1"),
        FunctionField(dim, lambda x: x[:, 0], lambda x: np.eye(dim)[0] + 0 * x, name="x0"),
        FunctionField(dim, lambda x: x[:, 0] ** 2,
                      lambda x: 2 * x[:, 0:1] * np.eye(dim)[0], name="x0^2"),
        FunctionField(dim, lambda x: np.cos(x @ u),
                      lambda x: -np.sin(x @ u)[:, None] * u, name="cos<u,x>"),
        FunctionField(dim, lambda x: np.sum(x, axis=1), lambda x: np.ones_like(x), name="sum"),
    ]
    if dim >= 2:
        fields.append(FunctionField(
            dim, lambda x: x[:, 0] * x[:, 1],
            lambda x: np.stack([x[:, 1], x[:, 0]] + [0 * x[:, 0]] * (dim - 2), axis=1), name="x0x1"))
    return fields


def verify_poincare(W, c, q, battery=None, floor=TOL_FLOOR, seed=0):
    """``(1 - c) Var(f) <= int |grad f|^2 e^{-W} dgamma`` for each test field.

    The report carries the items of the field with the smallest slack; all
    fields are listed in ``diagnostics["fields"]``.
    """
    c = _check_c(c)
    _check_semiconvex(W, c, seed)
    battery = default_battery(W.dim) if battery is None else battery
    worst = None
    rows = []
    for f in battery:
        mean = _fv("mean", q, W, f.value)
        second = _fv("second", q, W, lambda x: f.value(x) ** 2)
        var = FunctionalValue("var", max(second.value - mean.value**2, 0.0), q.order,
                              second.trunc_error + 2 * abs(mean.value) * mean.trunc_error)
        energy = _fv("grad_energy", q, W, lambda x: np.sum(f.grad(x) ** 2, axis=1))
        rep = _assemble("poincare", "le", [Item("var", "lhs", 1.0 - c, var), Item("grad_energy", "rhs", 1.0, energy)], floor=floor)
        name = getattr(f, "name", "") or repr(f)
        rows.append({"field": name, "lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack, "verdict": rep.verdict})
        if worst is None or rep.slack + rep.tolerance < worst.slack + worst.tolerance:
            worst = rep
            worst.diagnostics = {"field": name}
    worst.diagnostics.update(c=c, fields=rows)
    if any(r["verdict"] != "holds" for r in rows):
        worst.verdict = "violated"
    return worst


MA_TOL = {"identity": 1e-10, "linear": 1e-10, "quantile1d": 1e-4, "entropic": 5e-2}


def _backend_tol(T):
    comps = getattr(T, "components", None)
    if comps:
        return max(_backend_tol(c) for c in comps)
    return MA_TOL.get(T.backend, 1e-4)


def ma_probe_grid(dim, radius=3.0, points=None):
    points = points or {1: 601, 2: 61, 3: 21}.get(dim, 9)
    z = np.linspace(-radius, radius, points)
    grids = np.meshgrid(*([z] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def verify_ma_residual(V, W, T, radius=3.0, points=None, tolerance=None):
    """``sup |r(x)|`` of the Monge-Ampere residual over a grid on ``[-radius, radius]^d``."""
    tol = _backend_tol(T) if tolerance is None else float(tolerance)
    x = ma_probe_grid(T.dim, radius, points)
    r = np.abs(F.ma_residual(V, W, T, x))
    i = int(np.argmax(r))
    items = [Item("sup_residual", "lhs", 1.0, _const("sup_residual", r[i])),
             Item("zero", "rhs", 1.0, _const("zero", 0.0))]
    rep = _assemble("ma-residual", "le", items, floor=tol,
                    diagnostics={"argmax": x[i].tolist(), "probes": len(x), "radius": radius})
    return rep

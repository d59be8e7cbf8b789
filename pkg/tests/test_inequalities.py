from __future__ import annotations

import math

import numpy as np
import pytest

from gaussot import inequalities as I
from gaussot import potentials as P
from gaussot.errors import PreconditionError
from gaussot.potentials import FunctionField
from gaussot.quadrature import gauss_hermite
from gaussot.transport import Identity, Linear, Product, solve_gaussian_closed_form
from gaussot.transport.quantile import solve_quantile_1d

SQRT2 = math.sqrt(2.0)
ENT_N02 = 0.5 - math.log(2) / 2


def _resum(rep):
    lhs = math.fsum(it.contribution for it in rep.items if it.side == "lhs")
    rhs = math.fsum(it.contribution for it in rep.items if it.side == "rhs")
    return lhs, rhs


def _gauss(var):
    return P.gaussian_potential([0.0], [[var]])


# -- thm21 ---------------------------------------------------------------------

def test_thm21_identical_pairs(q1, zero1, n02, lin_map):
    rep = I.verify_identity_thm21(zero1, zero1, n02, n02, lin_map, lin_map, q1)
    assert rep.lhs == pytest.approx(0.0, abs=1e-14)
    assert rep.rhs == pytest.approx(0.0, abs=1e-14)
    assert rep.verdict == "identity-ok"


def test_thm21_gaussian_quadruple_and_swap(q1, zero1, n02, lin_map):
    h2 = _gauss(1.21)
    T2 = solve_gaussian_closed_form(h2, n02)
    rep = I.verify_identity_thm21(zero1, h2, n02, n02, lin_map, T2, q1)
    assert rep.verdict == "identity-ok" and rep.tolerance >= 1e-4
    assert rep.slack <= 1e-10
    assert abs(rep.lhs) > 1e-3
    swap = I.verify_identity_thm21(h2, zero1, n02, n02, T2, lin_map, q1)
    assert swap.verdict == "identity-ok" and swap.slack <= 1e-10


def test_thm21_distinct_targets(q1, zero1, n02):
    h2, f2 = _gauss(1.21), _gauss(2.5)
    T1 = solve_gaussian_closed_form(zero1, n02)
    T2 = solve_gaussian_closed_form(h2, f2)
    rep = I.verify_identity_thm21(zero1, h2, n02, f2, T1, T2, q1)
    assert rep.verdict == "identity-ok" and rep.slack <= 1e-9


def test_thm21_quantile_backend(q1, zero1, quartic_well, quantile_well):
    h2 = P.normalize(P.Quadratic([[0.3]], b=[0.1]), q1)
    T2 = solve_quantile_1d(h2, quartic_well)
    rep = I.verify_identity_thm21(zero1, h2, quartic_well, quartic_well, quantile_well, T2, q1)
    assert rep.verdict == "identity-ok", rep.as_dict()


def test_thm21_detects_wrong_map(q1, zero1, n02, lin_map):
    h2 = _gauss(1.21)
    rep = I.verify_identity_thm21(zero1, h2, n02, n02, lin_map, Linear([[1.5]]), q1)
    assert rep.verdict == "identity-broken"


# -- cor22 ---------------------------------------------------------------------

def test_cor22_identical(q1, zero1, n02, lin_map):
    rep = I.verify_cor22(zero1, zero1, n02, n02, lin_map, lin_map, 0.5, q1)
    assert rep.lhs == pytest.approx(0.0, abs=1e-14) and rep.rhs == 0.0
    assert rep.ok and rep.diagnostics["targets_equal"]


def test_cor22_sweep_refinement(q1, zero1, n02, lin_map):
    slacks = []
    for eps in (0.2, 0.1, 0.05, 0.02, 0.01, 0.001):
        V2 = P.normalize(P.Quadratic([[2 * eps]]), q1)
        T2 = solve_gaussian_closed_form(V2, n02)
        rep = I.verify_cor22(zero1, V2, n02, n02, lin_map, T2, 0.5, q1)
        assert rep.verdict == "holds"
        assert rep.diagnostics["refined_verdict"] == "holds"
        assert rep.diagnostics["refined_slack"] >= 0
        slacks.append(rep.slack)
    assert all(a > b for a, b in zip(slacks, slacks[1:]))
    assert slacks[-1] < 1e-3


def test_cor22_requires_positive_c(q1, zero1, n02, lin_map):
    with pytest.raises(PreconditionError):
        I.verify_cor22(zero1, zero1, n02, n02, lin_map, lin_map, 0.0, q1)
    with pytest.raises(PreconditionError):
        I.verify_cor22(zero1, zero1, n02, n02, lin_map, lin_map, 0.6, q1)


# -- thm23 ---------------------------------------------------------------------

def test_thm23_equal(q1, n02):
    rep = I.verify_thm23(n02, n02, Identity(1), q1)
    assert rep.lhs == pytest.approx(0.0, abs=1e-12) and rep.rhs == pytest.approx(0.0, abs=1e-12)


def test_thm23_gaussian_closed_forms(q1, zero1, n02, lin_map):
    rep = I.verify_thm23(zero1, n02, lin_map, q1)
    it = {k: v.value.value for k, v in rep.items_by_name().items()}
    k = SQRT2 - 1
    assert it["hs_phi"] == pytest.approx(k**2, abs=1e-12)
    assert it["log_det2"] == pytest.approx(math.log(SQRT2) + 1 - SQRT2, abs=1e-12)
    assert it["sandwich"] == pytest.approx(0.0, abs=1e-12)
    assert rep.lhs == pytest.approx(-0.5, abs=1e-10)
    assert rep.verdict == "holds"


def test_thm23_quartic_target(q1, zero1, quartic, quantile_quartic):
    rep = I.verify_thm23(zero1, quartic, quantile_quartic, q1, floor=1e-3)
    assert rep.verdict == "holds", rep.as_dict()


def test_thm23_rejects_entropic(q1, zero1, n02, entropic_1d):
    from gaussot.errors import UnsupportedBackendError
    with pytest.raises(UnsupportedBackendError):
        I.verify_thm23(zero1, n02, entropic_1d, q1)


# -- thm24 ---------------------------------------------------------------------

def test_thm24_zero_potentials(q1, zero1):
    rep = I.verify_thm24(zero1, zero1, Identity(1), 0.0, q1)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.verdict == "holds"


def test_thm24_gaussian_example(q1, zero1, n02, lin_map):
    rep = I.verify_thm24(zero1, n02, lin_map, 0.5, q1)
    assert rep.lhs == pytest.approx(0.5, abs=1e-10)
    assert rep.rhs == pytest.approx(-2 * ENT_N02 + 0.25 * (SQRT2 - 1) ** 2, abs=1e-10)
    assert rep.slack == pytest.approx(0.763959, abs=1e-6)


@pytest.mark.parametrize("d", range(1, 9))
def test_thm24_linear_in_dimension(q1, zero1, n02, lin_map, d):
    base = I.verify_thm24(zero1, n02, lin_map, 0.5, q1)
    rep = I.verify_thm24(P.Separable([zero1] * d), P.Separable([n02] * d), Product([lin_map] * d), 0.5, q1)
    assert rep.lhs == pytest.approx(d * base.lhs, abs=1e-9)
    assert rep.rhs == pytest.approx(d * base.rhs, abs=1e-9)
    assert rep.slack / d == pytest.approx(base.slack, abs=1e-6)


def test_thm24_separable_route_matches_full_rule(q1, zero1, n02, lin_map):
    q2 = gauss_hermite(2, 40)
    W = P.gaussian_potential([0.0, 0.0], [[2.0, 0.0], [0.0, 2.0]])
    T = solve_gaussian_closed_form(P.Quadratic(np.zeros((2, 2))), W)
    full = I.verify_thm24(P.Quadratic(np.zeros((2, 2))), W, T, 0.5, q2)
    sep = I.verify_thm24(P.Separable([zero1] * 2), P.Separable([n02] * 2), Product([lin_map] * 2), 0.5, q1)
    assert full.slack == pytest.approx(sep.slack, abs=1e-9)


def test_thm24_append_coordinates_invariant(q1, zero1, quartic, quantile_quartic):
    base = I.verify_thm24(zero1, quartic, quantile_quartic, 0.0, q1)
    for extra in (1, 3):
        rep = I.verify_thm24(P.Separable([zero1] + [zero1] * extra), P.Separable([quartic] + [zero1] * extra),
                             Product([quantile_quartic] + [Identity(1)] * extra), 0.0, q1)
        assert rep.slack == pytest.approx(base.slack, abs=1e-8)


def test_thm24_c_monotone_on_suite(q1, zero1, n02, quartic, quartic_well, lin_map, quantile_quartic, quantile_well):
    suite = [(n02, lin_map, 0.5), (quartic, quantile_quartic, 0.0), (quartic_well, quantile_well, 0.3)]
    for W, T, c0 in suite:
        cs = [c for c in (0.0, 0.3, 0.5, 0.7, 0.9, 0.99) if c >= c0]
        held = [I.verify_thm24(zero1, W, T, c, q1).ok for c in cs]
        for a, b in zip(held, held[1:]):
            assert not (a and not b)


def test_thm24_preconditions(q1, zero1, n02, lin_map):
    with pytest.raises(PreconditionError):
        I.verify_thm24(zero1, n02, lin_map, 1.0, q1)
    with pytest.raises(PreconditionError):
        I.verify_thm24(zero1, n02, lin_map, 0.4, q1)


# -- thm25 ---------------------------------------------------------------------

def test_thm25_linear(q1, zero1, n02, lin_map):
    rep = I.verify_thm25(zero1, n02, lin_map, 0.5, 1.0, q1)
    assert rep.lhs == pytest.approx(0.0, abs=1e-12) and rep.verdict == "holds"


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_thm25_quartic(q1, zero1, quartic, quantile_quartic, p):
    rep = I.verify_thm25(zero1, quartic, quantile_quartic, 0.0, p, q1)
    assert rep.lhs > 0 and rep.verdict == "holds"


def test_lp_exponent_guard():
    assert I.lp_exponent(1.0) == 2.0
    assert I.lp_exponent(1.5) == 6.0
    assert math.isfinite(I.lp_exponent(1.999))
    for p in (2.0, 0.5, 1.9999999):
        with pytest.raises(PreconditionError):
            I.lp_exponent(p)


# -- thm26 / thm29 -----------------------------------------------------------

def test_thm26_identical(q1, zero1, n02, lin_map):
    pair = (zero1, n02, lin_map)
    for variant in ("base", "thm29"):
        rep = I.verify_thm26(pair, pair, 0.5, 1.0, q1, variant=variant)
        assert rep.lhs == pytest.approx(0.0, abs=1e-14) and rep.rhs == pytest.approx(0.0, abs=1e-14)
        assert rep.name == ("thm26" if variant == "base" else "thm29")


def test_thm26_gaussian_pairs(q1, zero1, n02, lin_map):
    f2 = _gauss(2.25)
    T2 = solve_gaussian_closed_form(zero1, f2)
    base = I.verify_thm26((zero1, n02, lin_map), (zero1, f2, T2), 0.5, 1.0, q1)
    assert base.lhs == pytest.approx((1.5 - SQRT2) ** 2, abs=1e-12)
    assert base.verdict == "holds"
    v29 = I.verify_thm26((zero1, n02, lin_map), (zero1, f2, T2), 0.5, 1.0, q1, variant="thm29")
    assert v29.verdict == "holds" and v29.rhs >= base.rhs - 1e-14


def test_thm26_sweep(q1, zero1, n02, lin_map):
    lhs = []
    for var in (3.0, 2.5, 2.2, 2.05, 2.01):
        f2 = _gauss(var)
        for V2 in (zero1, P.normalize(P.Quadratic([[0.05 * (var - 2)]]), q1)):
            T2 = solve_gaussian_closed_form(V2, f2)
            rep = I.verify_thm26((zero1, n02, lin_map), (V2, f2, T2), 0.5, 1.2, q1)
            assert rep.verdict == "holds"
        lhs.append(I.verify_thm26((zero1, n02, lin_map), (zero1, f2, solve_gaussian_closed_form(zero1, f2)), 0.5, 1.2, q1).lhs)
    assert all(a > b for a, b in zip(lhs, lhs[1:]))
    assert lhs[-1] == pytest.approx((math.sqrt(2.01) - SQRT2) ** 2, rel=1e-8)


def test_thm26_bad_variant(q1, zero1, n02, lin_map):
    with pytest.raises(PreconditionError):
        I.verify_thm26((zero1, n02, lin_map), (zero1, n02, lin_map), 0.5, 1.0, q1, variant="x")


# -- talagrand / poincare ------------------------------------------------------

def test_talagrand(q1, zero1, n02, lin_map, quartic, quantile_quartic):
    assert I.verify_talagrand(zero1, Identity(1), q1).lhs == pytest.approx(0.0, abs=1e-15)
    rep = I.verify_talagrand(n02, lin_map, q1)
    assert rep.rhs == pytest.approx(0.171573, abs=1e-6) and rep.lhs == pytest.approx(0.306853, abs=1e-6)
    assert I.verify_talagrand(quartic, quantile_quartic, q1).verdict == "holds"


def _field(f, g):
    return FunctionField(1, f, g)


def test_poincare_examples(q1, n02):
    const = _field(lambda x: np.ones(len(x)), lambda x: np.zeros_like(x))
    lin = _field(lambda x: x[:, 0], lambda x: np.ones_like(x))
    sq = _field(lambda x: x[:, 0] ** 2, lambda x: 2 * x)
    rep = I.verify_poincare(n02, 0.5, q1, battery=[const])
    assert rep.lhs == pytest.approx(0.0, abs=1e-12) and rep.rhs == 0.0
    rep = I.verify_poincare(n02, 0.5, q1, battery=[lin])
    assert rep.lhs == pytest.approx(1.0, abs=1e-10) and rep.rhs == pytest.approx(1.0, abs=1e-10)
    assert rep.verdict == "holds"
    rep = I.verify_poincare(n02, 0.5, q1, battery=[sq])
    assert rep.lhs == pytest.approx(4.0, abs=1e-9) and rep.rhs == pytest.approx(8.0, abs=1e-9)
    rep = I.verify_poincare(n02, 0.5, q1, battery=[sq, lin, const])
    assert rep.diagnostics["field"] in ("x0", "") or abs(rep.slack) < 1e-9
    assert len(rep.diagnostics["fields"]) == 3


def test_poincare_default_battery(q1, quartic_well):
    rep = I.verify_poincare(quartic_well, 0.3, q1)
    assert rep.verdict == "holds"
    assert {r["field"] for r in rep.diagnostics["fields"]} >= {"1", "x0", "x0^2"}


# -- ma residual / bookkeeping -------------------------------------------------

def test_ma_residual_reports(zero1, n02, lin_map, quartic, quantile_quartic):
    rep = I.verify_ma_residual(zero1, n02, lin_map)
    assert rep.verdict == "holds" and rep.tolerance == 1e-10
    rep = I.verify_ma_residual(zero1, quartic, quantile_quartic, radius=2.0)
    assert rep.verdict == "holds" and rep.tolerance == 1e-4
    bad = I.verify_ma_residual(zero1, n02, Linear([[1.2]]))
    assert bad.verdict == "violated"


def test_bookkeeping_resums(q1, zero1, n02, lin_map, quartic, quantile_quartic):
    h2 = _gauss(1.21)
    T2 = solve_gaussian_closed_form(h2, n02)
    reports = [
        I.verify_identity_thm21(zero1, h2, n02, n02, lin_map, T2, q1),
        I.verify_cor22(zero1, h2, n02, n02, lin_map, T2, 0.5, q1),
        I.verify_thm23(zero1, quartic, quantile_quartic, q1),
        I.verify_thm24(zero1, quartic, quantile_quartic, 0.0, q1),
        I.verify_thm25(zero1, quartic, quantile_quartic, 0.0, 1.0, q1),
        I.verify_thm26((zero1, n02, lin_map), (h2, n02, T2), 0.5, 1.0, q1),
        I.verify_talagrand(quartic, quantile_quartic, q1),
        I.verify_poincare(n02, 0.5, q1),
    ]
    for rep in reports:
        assert _resum(rep) == (rep.lhs, rep.rhs), rep.name
        trunc = max(abs(it.coef) * it.value.trunc_error for it in rep.items)
        assert rep.tolerance >= 1e3 * trunc
        d = rep.as_dict()
        assert d["verdict"] == rep.verdict and len(d["items"]) == len(rep.items)

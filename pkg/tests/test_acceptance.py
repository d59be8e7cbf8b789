"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from gaussot import cli
from gaussot import functionals as F
from gaussot import inequalities as I
from gaussot import matrix_lemmas as M
from gaussot import potentials as P
from gaussot import wiener_tower as WT
from gaussot.config import load_scenario
from gaussot.potentials import FunctionField
from gaussot.quadrature import gauss_hermite, integrate
from gaussot.transport import Linear, solve_gaussian_closed_form

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def report(record_property):
    def emit(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        print("\n" + line)
        record_property("acceptance", line)
        assert ok, detail
    return emit


def test_ac1_lemma42_identity(report):
    t0 = time.perf_counter()
    s = M.check_suite(count=1000, seed=0)
    dt = time.perf_counter() - t0
    ok = s["lemma42_worst_residual"] <= 1e-8 and dt < 30
    report("AC1", ok, f"worst |lhs-rhs| = {s['lemma42_worst_residual']:.3e} (tol 1e-8) over 1000 pairs in {dt:.1f} s (< 30 s)")


def test_ac2_lemma41(report):
    s = M.check_suite(count=1000, seed=1)
    rng = np.random.Generator(np.random.Philox(2))
    eq = 0.0
    for lam in (0.1, 0.5, 1.0, 3.0, 10.0):
        for d in range(1, 9):
            r = M.lemma41_check(lam * np.eye(d), M.random_symmetric(rng, d))
            eq = max(eq, abs(r["lhs"] - r["rhs"]) / max(1.0, r["lhs"]))
    ok = s["lemma41_violations"] == 0 and eq <= 1e-12
    report("AC2", ok, f"{s['lemma41_violations']} violations over 1000 pairs; equality gap for A = lam I {eq:.2e} (tol 1e-12)")


def test_ac3_gaussian_benchmark(report):
    t0 = time.perf_counter()
    q = gauss_hermite(1, 60)
    V = P.Quadratic([[0.0]])
    W = P.gaussian_potential([0.0], [[2.0]])
    T = solve_gaussian_closed_form(V, W)
    got = {
        "fisher": F.fisher_information(W, q).value,
        "entropy": F.relative_entropy(W, q).value,
        "w2_sq": F.w2_cost_from_map(T, V, q).value,
        "hess_phi": float(T.jacobian([[0.3]])[0, 0, 0] - 1.0),
        "slack": I.verify_thm24(V, W, T, 0.5, q).slack,
    }
    want = {"fisher": 0.5, "entropy": 0.5 - math.log(2) / 2, "w2_sq": (SQRT2 - 1) ** 2,
            "hess_phi": SQRT2 - 1, "slack": 0.763959}
    err = max(abs(got[k] - want[k]) for k in want)
    dt = time.perf_counter() - t0
    ok = err <= 1e-4 and dt < 5
    report("AC3", ok, f"max error {err:.2e} (tol 1e-4) over {sorted(want)} in {dt:.2f} s (< 5 s)")


def test_ac4_dimension_free(report):
    t0 = time.perf_counter()
    sc = load_scenario(cli.resolve_scenario_path("gauss-1d.toy"))
    rows, reports = cli.sweep_dimension(sc, [1, 2, 4, 8], tag="thm24")
    per_d = [r[4] for r in rows]
    spread = max(per_d) - min(per_d)
    dt = time.perf_counter() - t0
    ok = spread <= 1e-6 and all(r.ok for r in reports) and dt < 60
    report("AC4", ok, f"slack/d spread {spread:.2e} (tol 1e-6), slack/d = {per_d[0]:.6f}, in {dt:.2f} s (< 60 s)")


def test_ac5_ma_residual(report, zero1, n02, quartic):
    from gaussot.transport.quantile import solve_quantile_1d
    t0 = time.perf_counter()
    x = np.linspace(-3, 3, 601)[:, None]
    lin = np.max(np.abs(F.ma_residual(zero1, n02, solve_gaussian_closed_form(zero1, n02), x)))
    quant = np.max(np.abs(F.ma_residual(zero1, quartic, solve_quantile_1d(zero1, quartic), x)))
    dt = time.perf_counter() - t0
    ok = lin <= 1e-10 and quant <= 1e-4 and dt < 10
    report("AC5", ok, f"linear sup|r| {lin:.2e} (tol 1e-10), quantile quartic {quant:.2e} (tol 1e-4), {dt:.2f} s (< 10 s)")


def test_ac6_thm21_quadruples(report):
    t0 = time.perf_counter()
    q = gauss_hermite(1, 60)
    g = lambda var, m=0.0: P.gaussian_potential([m], [[var]])
    quads = [
        (P.Quadratic([[0.0]]), g(1.21), g(2.0), g(2.0)),
        (P.Quadratic([[0.0]]), g(0.8, 0.3), g(2.0), g(1.5, -0.2)),
        (g(1.5), g(0.7), g(0.6, 0.5), g(3.0)),
    ]
    worst = 0.0
    ok = True
    for V1, V2, W1, W2 in quads:
        T1, T2 = solve_gaussian_closed_form(V1, W1), solve_gaussian_closed_form(V2, W2)
        rep = I.verify_identity_thm21(V1, V2, W1, W2, T1, T2, q)
        worst = max(worst, rep.slack)
        ok &= rep.verdict == "identity-ok" and rep.slack <= 1e-4
    dt = time.perf_counter() - t0
    ok &= dt < 30
    report("AC6", ok, f"worst |lhs-rhs| {worst:.2e} (tol 1e-4) over 3 quadruples in {dt:.2f} s (< 30 s)")


def test_ac7_inequality_suite(report):
    t0 = time.perf_counter()
    names = cli.bundled_scenarios()
    tags, bad = set(), []
    for name in names:
        rep, code = cli.run_scenario(load_scenario(cli.resolve_scenario_path(name)))
        for r in rep["verifications"]:
            if r["tag"] == "thm25" and r["diagnostics"]["p"] != 1.0:
                continue
            tags.add(r["tag"])
            if r["verdict"] not in ("holds", "identity-ok"):
                bad.append(f"{name}:{r['id']}={r['verdict']}")
        if code != 0:
            bad.append(f"{name}: exit {code}")
    dt = time.perf_counter() - t0
    need = {"thm23", "thm24", "thm25", "thm26", "thm29", "cor22", "talagrand", "poincare"}
    dims = {load_scenario(cli.resolve_scenario_path(n)).dim for n in names}
    ok = len(names) == 12 and need <= tags and not bad and dims == {1, 2, 3} and dt < 300
    report("AC7", ok, f"{len(names)} scenarios, tags {sorted(tags & need)}, violations {bad or 0}, dims {sorted(dims)}, {dt:.1f} s (< 300 s)")


def test_ac8_solver_cross_validation(report, zero1, n02, quantile_n02, entropic_1d, entropic_2d):
    lin = solve_gaussian_closed_form(zero1, n02)
    x3 = np.linspace(-3, 3, 601)[:, None]
    qerr = float(np.max(np.abs(quantile_n02.value(x3) - lin.value(x3))))
    x2 = np.linspace(-2, 2, 401)[:, None]
    e1 = float(np.max(np.abs(entropic_1d.value(x2) - lin.value(x2))))
    z = np.linspace(-2, 2, 41)
    g = np.stack([a.ravel() for a in np.meshgrid(z, z, indexing="ij")], axis=1)
    e2 = float(np.max(np.abs(entropic_2d.value(g) - Linear(np.diag([2.0, 1.0])).value(g))))
    ok = qerr <= 1e-6 and e1 <= 2e-2 and e2 <= 2e-2
    report("AC8", ok, f"quantile vs linear {qerr:.2e} (tol 1e-6); entropic 1D {e1:.2e}, 2D {e2:.2e} (tol 2e-2)")


def test_ac9_tower(report):
    spec = WT.SeparableQuadraticSpec((0.5, 0.25, 0.125))
    levels = WT.tower_w2_sequence(*WT.spec_potentials(spec))
    w = [lv.w2_sq for lv in levels]
    drop = max([a - b for a, b in zip(w, w[1:])] + [0.0])
    want = sum(((1 + 2 * lam) ** -0.5 - 1) ** 2 for lam in spec.lambdas)
    err = abs(w[-1] - want)
    ok = drop <= 1e-8 and err <= 1e-6
    report("AC9", ok, f"levels {[round(v, 7) for v in w]}, worst decrease {drop:.1e} (tol 1e-8), final error {err:.2e} (tol 1e-6)")


def _ou_battery():
    return [
        FunctionField(1, lambda x: x[:, 0], lambda x: np.ones_like(x), lambda x: np.zeros((len(x), 1, 1))),
        FunctionField(1, lambda x: x[:, 0] ** 2, lambda x: 2 * x, lambda x: np.full((len(x), 1, 1), 2.0)),
        FunctionField(1, lambda x: np.cos(x[:, 0]), lambda x: -np.sin(x), lambda x: -np.cos(x)[:, :, None]),
    ]


def test_ac10_ou_semigroup(report):
    q = gauss_hermite(1, 60)
    x = np.linspace(-2.5, 2.5, 21)[:, None]
    h = 1e-5
    law = comm = contr = 0.0
    for f in _ou_battery():
        for s, t in ((0.2, 0.5), (1.0, 0.3)):
            lhs = WT.ou_semigroup(WT.ou_semigroup(f, t), s).value(x)
            law = max(law, float(np.max(np.abs(lhs - WT.ou_semigroup(f, s + t).value(x)))))
        for eps in (0.1, 0.7):
            Pf = WT.ou_semigroup(f, eps)
            fd = (Pf.value(x + h) - Pf.value(x - h)) / (2 * h)
            gf = FunctionField(1, lambda p, f=f: f.grad(p)[:, 0], lambda p, f=f: f.hessian(p)[:, 0, :])
            comm = max(comm, float(np.max(np.abs(fd - math.exp(-eps) * WT.ou_semigroup(gf, eps).value(x)))))
            before = integrate(q, lambda p, f=f: np.sum(f.grad(p) ** 2, axis=1))
            after = integrate(q, lambda p, Pf=Pf: np.sum(Pf.grad(p) ** 2, axis=1))
            contr = max(contr, after - before)
    ok = law <= 1e-6 and comm <= 1e-6 and contr <= 1e-6
    report("AC10", ok, f"semigroup {law:.1e}, commutation {comm:.1e}, contraction excess {contr:.1e} (tol 1e-6)")


@pytest.mark.parametrize("name", ["gauss-1d.full", "pairs-2d.gauss"])
def test_ac11_determinism(report, name):
    sc = load_scenario(cli.resolve_scenario_path(name))
    a, _ = cli.run_scenario(sc, jobs=1)
    b, _ = cli.run_scenario(load_scenario(cli.resolve_scenario_path(name)), jobs=4)
    ta, tb = cli.dumps(cli.strip_timings(a)), cli.dumps(cli.strip_timings(b))
    report("AC11", ta == tb, f"{name}: repeated runs byte-identical without timings ({len(ta)} bytes)")

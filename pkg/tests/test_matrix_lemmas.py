from __future__ import annotations

import math

import numpy as np
import pytest

from gaussot import matrix_lemmas as M
from gaussot.errors import ConvexityError, DimensionError


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def test_pair_flags():
    pair = M.SymmetricMatrixPair.build(np.diag([1.0, 2.0]), np.diag([-0.5, 0.0]))
    assert pair.A_spd and pair.IA_pd and pair.IB_pd and pair.dim == 2
    pair = M.SymmetricMatrixPair.build(np.diag([-2.0, 2.0]), np.zeros((2, 2)))
    assert not pair.A_spd and not pair.IA_pd
    with pytest.raises(DimensionError):
        M.SymmetricMatrixPair.build(np.eye(2), np.eye(3))
    with pytest.raises(DimensionError):
        M.SymmetricMatrixPair.build(np.eye(17), np.eye(17))
    with pytest.raises(ValueError):
        M.SymmetricMatrixPair.build([[1.0, 2.0], [0.0, 1.0]], np.eye(2))


def test_lemma41_examples():
    B = M.random_symmetric(_rng(1), 3)
    r = M.lemma41_check(np.eye(3), B)
    assert r["lhs"] == pytest.approx(np.linalg.norm(B), abs=1e-12) and r["rhs"] == pytest.approx(r["lhs"], abs=1e-12)
    r = M.lemma41_check(np.diag([1.0, 4.0]), np.eye(2))
    assert r["lhs"] == pytest.approx(math.sqrt(1 + 1 / 16), abs=1e-12)
    assert r["rhs"] == pytest.approx(math.sqrt(2) / 4, abs=1e-12) and r["holds"]
    r = M.lemma41_check(np.eye(2), np.zeros((2, 2)))
    assert r["lhs"] == 0.0 and r["rhs"] == 0.0 and r["holds"]
    with pytest.raises(ConvexityError):
        M.lemma41_check(np.diag([1.0, -1.0]), np.eye(2))


@pytest.mark.parametrize("lam", [0.1, 1.0, 7.5])
def test_lemma41_equality_for_scalar_a(lam):
    B = M.random_symmetric(_rng(2), 4)
    r = M.lemma41_check(lam * np.eye(4), B)
    assert abs(r["lhs"] - r["rhs"]) <= 1e-12 * max(1.0, r["lhs"])


def test_lemma42_examples():
    A = _rng(3).standard_normal((3, 3))
    A = 0.1 * (A + A.T)
    assert M.lemma42_lhs(A, A) == pytest.approx(0.0, abs=1e-14)
    assert M.lemma42_rhs(A, A) == 0.0
    want = 1 - math.log(2)
    assert M.lemma42_lhs([[1.0]], [[0.0]]) == pytest.approx(want, abs=1e-14)
    assert M.lemma42_rhs([[1.0]], [[0.0]]) == pytest.approx(want, abs=1e-14)


def test_lemma42_split_and_product_routes_agree():
    rng = _rng(4)
    for d in range(1, 9):
        A, B = M.random_pair(rng, d)
        assert M.lemma42_lhs(A, B) == pytest.approx(M.lemma42_lhs(A, B, split=False), abs=1e-10)


def test_lemma42_random_4x4_two_orders():
    A, B = M.random_pair(_rng(5), 4)
    lhs = M.lemma42_lhs(A, B)
    assert abs(M.lemma42_rhs(A, B, t_order=32) - lhs) <= 1e-8
    assert abs(M.lemma42_rhs(A, B, t_order=48) - lhs) <= 1e-8


def test_lemma42_fixed_panels_converge():
    A, B = M.random_pair(_rng(6), 3)
    lhs = M.lemma42_lhs(A, B)
    errs = [abs(M.lemma42_rhs(A, B, panels=k) - lhs) for k in (1, 4, 16)]
    assert max(errs) <= 1e-10


def test_lemma42_nonnegative_and_pd_errors():
    rng = _rng(7)
    for i in range(200):
        A, B = M.random_pair(rng, 1 + i % 8)
        assert M.lemma42_lhs(A, B) >= -1e-12
    with pytest.raises(ConvexityError):
        M.lemma42_lhs(np.diag([-1.5]), np.zeros((1, 1)))
    with pytest.raises(ConvexityError):
        M.lemma42_rhs(np.zeros((1, 1)), np.diag([-1.0]))


def test_random_pair_spectra():
    rng = _rng(8)
    for d in (1, 4, 8):
        A, B = M.random_pair(rng, d)
        for X in (A, B):
            lam = np.linalg.eigvalsh(np.eye(d) + X)
            assert lam.min() >= 0.1 - 1e-12 and lam.max() <= 4.0 + 1e-12


def test_check_suite_small_is_deterministic():
    a = M.check_suite(count=40, seed=3)
    b = M.check_suite(count=40, seed=3)
    assert a == b
    assert a["lemma42_pass"] and a["lemma41_pass"] and a["lemma41_violations"] == 0
    assert a["lemma41_min_margin"] >= -1e-10

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussot import potentials as P
from gaussot.errors import DimensionError, QuadratureError
from gaussot.quadrature import (
    gauss_hermite,
    gauss_legendre_unit,
    integrate,
    integrate_weighted,
    mc_sample,
)


def test_order_two_rule():
    q = gauss_hermite(1, 2)
    assert np.allclose(np.sort(q.nodes[:, 0]), [-1.0, 1.0])
    assert np.allclose(q.weights, 0.5)


@pytest.mark.parametrize("dim,order", [(1, 2), (1, 60), (2, 7), (3, 5), (4, 3)])
def test_rule_invariants(dim, order):
    q = gauss_hermite(dim, order)
    assert abs(q.weights.sum() - 1.0) <= 1e-12
    assert np.all(q.weights > 0)
    for i in range(dim):
        assert abs(integrate(q, lambda x: x[:, i])) <= 1e-12
        assert abs(integrate(q, lambda x: x[:, i] ** 2) - 1.0) <= 1e-12


def test_moment_examples():
    assert integrate(gauss_hermite(1, 3), lambda x: x[:, 0] ** 4) == pytest.approx(3.0, abs=1e-13)
    assert integrate(gauss_hermite(1, 40), lambda x: np.exp(x[:, 0] ** 2 / 4)) == pytest.approx(math.sqrt(2), abs=1e-8)
    assert integrate(gauss_hermite(2, 5), lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-14)


def _double_factorial_moment(k):
    return 0.0 if k % 2 else float(np.prod(np.arange(k - 1, 0, -2))) if k else 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.data())
def test_polynomial_exactness(order, data):
    q = gauss_hermite(2, order)
    top = 2 * order - 1
    a = data.draw(st.integers(0, top))
    b = data.draw(st.integers(0, top))
    exact = _double_factorial_moment(a) * _double_factorial_moment(b)
    got = integrate(q, lambda x: x[:, 0] ** a * x[:, 1] ** b)
    assert abs(got - exact) <= 1e-10 * max(1.0, abs(exact))


def test_weighted_examples(n02):
    q = gauss_hermite(1, 60)
    assert integrate_weighted(q, lambda x: np.ones(len(x)), n02) == pytest.approx(1.0, abs=1e-8)
    assert integrate_weighted(q, lambda x: x[:, 0] ** 2, n02) == pytest.approx(2.0, abs=1e-6)
    assert abs(integrate_weighted(q, lambda x: x[:, 0], n02)) <= 1e-10


def test_errors():
    with pytest.raises(DimensionError):
        gauss_hermite(5, 3)
    with pytest.raises(QuadratureError):
        gauss_hermite(1, 1)
    with pytest.raises(QuadratureError):
        gauss_hermite(4, 100)
    q = gauss_hermite(1, 4)
    with pytest.raises(QuadratureError, match="node"):
        integrate(q, lambda x: np.where(x[:, 0] > 2, np.inf, 1.0))


def test_fixed_order_reduction_is_reproducible():
    q = gauss_hermite(2, 30)
    f = lambda x: np.cos(x[:, 0] * x[:, 1]) + x[:, 0] ** 3
    assert integrate(q, f) == integrate(q, f)
    chunks = np.concatenate([f(q.nodes[i:i + 97]) for i in range(0, q.size, 97)])
    assert math.fsum(q.weights * chunks) == integrate(q, f)


def test_refined_and_axis():
    q = gauss_hermite(2, 10)
    assert q.refined().order == 18
    assert q.axis().dim == 1 and q.axis().order == 10


def test_mc_sample_contract():
    s = mc_sample(1, 10**5, 42)
    assert abs(np.mean(s.points[:, 0] ** 2) - 1.0) <= 3 * math.sqrt(2 / 1e5)
    assert np.array_equal(mc_sample(2, 50, 9).points, mc_sample(2, 50, 9).points)
    assert not np.array_equal(mc_sample(2, 50, 9, stream=1).points, mc_sample(2, 50, 9).points)
    assert mc_sample(3, 1, 7).points.shape == (1, 3)


def test_gauss_legendre_unit():
    t, w = gauss_legendre_unit(32)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all((t > 0) & (t < 1))
    assert math.fsum(w * (1 - t) / (1 + t) ** 2) == pytest.approx(1 - math.log(2), abs=1e-14)


def test_separable_normalize_uses_axis_rule():
    q = gauss_hermite(2, 40)
    sep = P.Separable([P.Polynomial({(4,): 0.05}, dim=1), P.Quadratic([[0.5]])])
    n = P.normalize(sep, q)
    assert integrate_weighted(q, lambda x: np.ones(len(x)), n) == pytest.approx(1.0, abs=1e-8)

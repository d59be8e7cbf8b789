from __future__ import annotations

import math

import numpy as np
import pytest

from gaussot import potentials as P
from gaussot.quadrature import gauss_hermite
from gaussot.transport import solve_gaussian_closed_form
from gaussot.transport.entropic import solve_entropic_grid
from gaussot.transport.quantile import solve_quantile_1d

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def q1():
    return gauss_hermite(1, 60)


@pytest.fixture(scope="session")
def zero1():
    return P.Quadratic([[0.0]])


@pytest.fixture(scope="session")
def n02():
    """Potential of N(0, 2) relative to gamma: -x^2/4 + ln(2)/2."""
    return P.gaussian_potential([0.0], [[2.0]])


@pytest.fixture(scope="session")
def quartic(q1):
    """Normalized x^4/20."""
    return P.normalize(P.Polynomial({(4,): 0.05}, dim=1), q1)


@pytest.fixture(scope="session")
def quartic_well(q1):
    """Normalized -0.15 x^2 + 0.05 x^4, semiconvex with c = 0.3."""
    return P.normalize(P.Polynomial({(2,): -0.15, (4,): 0.05}, dim=1), q1)


@pytest.fixture(scope="session")
def lin_map(zero1, n02):
    return solve_gaussian_closed_form(zero1, n02)


@pytest.fixture(scope="session")
def quantile_n02(zero1, n02):
    return solve_quantile_1d(zero1, n02)


@pytest.fixture(scope="session")
def quantile_quartic(zero1, quartic):
    return solve_quantile_1d(zero1, quartic)


@pytest.fixture(scope="session")
def quantile_well(zero1, quartic_well):
    return solve_quantile_1d(zero1, quartic_well)


@pytest.fixture(scope="session")
def entropic_1d(zero1, n02):
    return solve_entropic_grid(zero1, n02)


@pytest.fixture(scope="session")
def entropic_2d():
    V = P.Quadratic(np.zeros((2, 2)))
    W = P.gaussian_potential([0.0, 0.0], [[4.0, 0.0], [0.0, 1.0]])
    return solve_entropic_grid(V, W, radius=7.5, points=121, schedule=(1.0, 0.3, 0.1, 0.03, 0.01))


def pytest_terminal_summary(terminalreporter):
    lines = [value for rep in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
             for key, value in getattr(rep, "user_properties", []) if key == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[2:s.index(" ")])):
            terminalreporter.write_line(line)

import math

import numpy as np
import pytest
from scipy import integrate

from sticky_dbm.errors import NumericalFailure
from sticky_dbm.quadrature import integrate_1d, integrate_2d, split_points


def test_polynomial_exact():
    assert integrate_1d(lambda x: 3 * x ** 2, 0.0, 2.0) == pytest.approx(8.0, abs=1e-12)


def test_gaussian_matches_scipy():
    got = integrate_1d(lambda x: math.exp(-x * x), -6.0, 6.0)
    ref, _ = integrate.quad(lambda x: math.exp(-x * x), -6.0, 6.0)
    assert got == pytest.approx(ref, rel=1e-12)
    assert got == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_kink_needs_split():
    # |x| integrand: exact result with the split forced at the kink
    got = integrate_1d(lambda x: abs(x), -1.0, 2.0, breakpoints=(0.0,))
    assert got == pytest.approx(0.5 + 2.0, rel=1e-12)


def test_split_points_filters_interior():
    assert split_points(0.0, 1.0, (-1.0, 0.25, 0.5, 2.0)) == [0.0, 0.25, 0.5, 1.0]


def test_empty_interval():
    assert integrate_1d(lambda x: 1.0, 1.0, 1.0) == 0.0
    assert integrate_1d(lambda x: 1.0, 2.0, 1.0) == 0.0


def test_2d_separable():
    got = integrate_2d(lambda x, y: math.exp(-x * x - y * y),
                       ((-3.0, 3.0), (-3.0, 3.0)))
    exact = (math.sqrt(math.pi) * math.erf(3.0)) ** 2
    assert got == pytest.approx(exact, rel=1e-9)


def test_nonfinite_integrand_raises():
    with pytest.raises(NumericalFailure):
        integrate_1d(lambda x: math.inf, 0.0, 1.0)

import math

import numpy as np
import pytest
from scipy import integrate

from sticky_dbm.errors import ConfigurationError, ContractViolation
from sticky_dbm.measure import (check_log_gradient, constant_density,
                                gaussian_density, nearest_sticky_distance,
                                points_1d, rect_boundary_2d,
                                require_process_conditions, rho_mu_mass,
                                surface_quadrature, truncation_box, Density)


@pytest.fixture(scope="module")
def gauss1():
    return gaussian_density(1)


@pytest.fixture(scope="module")
def gauss2():
    return gaussian_density(2)


def test_mass_constant_with_atom():
    # Lebesgue length 10 plus one unit atom
    mass = rho_mu_mass(constant_density(1), points_1d([0.0], 1.0), (-5.0, 5.0))
    assert mass == pytest.approx(11.0, rel=1e-12)


def test_mass_gaussian_with_atom(gauss1):
    mass = rho_mu_mass(gauss1, points_1d([0.0], 1.0), (-6.0, 6.0))
    closed_form = math.sqrt(math.pi) * math.erf(6.0) + 1.0
    ref, _ = integrate.quad(lambda x: math.exp(-x * x), -6.0, 6.0)
    assert mass == pytest.approx(closed_form, abs=1e-9)
    assert mass == pytest.approx(ref + 1.0, abs=1e-9)
    assert mass == pytest.approx(2.772454, abs=1e-6)


def test_mass_gaussian_2d_with_rect_boundary(gauss2):
    sticky = rect_boundary_2d(-1, 1, -1, 1, 1.0)
    mass = rho_mu_mass(gauss2, sticky, ((-4.0, 4.0), (-4.0, 4.0)))
    area = (math.sqrt(math.pi) * math.erf(4.0)) ** 2
    edge = math.exp(-1.0) * math.sqrt(math.pi) * math.erf(1.0)
    assert mass == pytest.approx(area + 4 * edge, rel=1e-9)


def test_surface_quadrature_perimeter():
    sticky = rect_boundary_2d(-1, 1, -1, 1, 1.0)
    got = surface_quadrature(constant_density(2), sticky, lambda p: 1.0)
    assert got == pytest.approx(8.0, rel=1e-12)


def test_surface_quadrature_x1_squared():
    sticky = rect_boundary_2d(-1, 1, -1, 1, 1.0)
    got = surface_quadrature(constant_density(2), sticky, lambda p: p[0] ** 2)
    assert got == pytest.approx(16.0 / 3.0, rel=1e-12)


def test_surface_quadrature_gaussian(gauss2):
    sticky = rect_boundary_2d(-1, 1, -1, 1, 1.0)
    got = surface_quadrature(gauss2, sticky, lambda p: 1.0)
    exact = 4 * math.exp(-1.0) * math.sqrt(math.pi) * math.erf(1.0)
    assert got == pytest.approx(exact, rel=1e-10)


def test_surface_quadrature_weight_scales(gauss2):
    base = surface_quadrature(gauss2, rect_boundary_2d(-1, 1, -1, 1, 1.0),
                              lambda p: 1.0)
    scaled = surface_quadrature(gauss2, rect_boundary_2d(-1, 1, -1, 1, 2.5),
                                lambda p: 1.0)
    assert scaled == pytest.approx(2.5 * base, rel=1e-12)


def test_nearest_sticky_distance_1d():
    assert nearest_sticky_distance(points_1d([0.0]), [0.5]) == pytest.approx(0.5)
    assert nearest_sticky_distance(points_1d([-1.0, 2.0]), [0.4]) == pytest.approx(1.4)
    assert nearest_sticky_distance(points_1d([0.0]), [0.0]) == 0.0


def test_nearest_sticky_distance_2d():
    sticky = rect_boundary_2d(-1, 1, -1, 1)
    assert nearest_sticky_distance(sticky, [0.0, 0.0]) == pytest.approx(1.0)
    assert nearest_sticky_distance(sticky, [1.0, 0.3]) == 0.0
    assert nearest_sticky_distance(sticky, [2.0, 2.0]) == pytest.approx(math.sqrt(2))
    assert nearest_sticky_distance(sticky, [3.0, 0.0]) == pytest.approx(2.0)


def test_degenerate_region_keeps_atoms(gauss1):
    # zero-volume region: only the atomic part survives
    mass = rho_mu_mass(gauss1, points_1d([0.5], 2.0), (0.5, 0.5))
    assert mass == pytest.approx(2.0 * math.exp(-0.25), rel=1e-12)


def test_additivity_disjoint_boxes(gauss1):
    sticky = points_1d([0.5], 1.0)
    left = rho_mu_mass(gauss1, sticky, (-5.0, 0.0))
    right = rho_mu_mass(gauss1, sticky, (0.0, 5.0))
    union = rho_mu_mass(gauss1, sticky, (-5.0, 5.0))
    assert left + right == pytest.approx(union, rel=1e-10)


def test_monotonicity(gauss1):
    sticky = points_1d([0.0], 1.0)
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.uniform(0.5, 2.0)
        b = a + rng.uniform(0.0, 3.0)
        small = rho_mu_mass(gauss1, sticky, (-a, a))
        large = rho_mu_mass(gauss1, sticky, (-b, b))
        assert large >= small - 1e-12


def test_null_weights_reduce_to_lebesgue(gauss1):
    box = truncation_box(4.0, 1)
    pure = rho_mu_mass(gauss1, None, box)
    tiny = rho_mu_mass(gauss1, points_1d([0.0], 1e-15), box)
    ref, _ = integrate.quad(lambda x: math.exp(-x * x), -4.0, 4.0)
    assert pure == pytest.approx(ref, rel=1e-10)
    assert tiny == pytest.approx(pure, rel=1e-10)


def test_gradient_consistency_all_catalog():
    box1 = truncation_box(4.0, 1)
    box2 = truncation_box(3.0, 2)
    assert check_log_gradient(gaussian_density(1), box1) < 1e-6
    assert check_log_gradient(constant_density(1), box1) < 1e-6
    assert check_log_gradient(gaussian_density(2), box2) < 1e-6


def test_bad_log_gradient_detected():
    bad = Density(dim=1, value=lambda x: math.exp(-float(x[0]) ** 2),
                  log_gradient=lambda x: -1.7 * np.asarray(x), integrable=True,
                  bounded=True)
    with pytest.raises(ConfigurationError):
        check_log_gradient(bad, truncation_box(3.0, 1))


def test_process_conditions():
    require_process_conditions(constant_density(1))   # bounded is enough in 1d
    require_process_conditions(gaussian_density(2))
    with pytest.raises(ConfigurationError):
        require_process_conditions(constant_density(2))


def test_sticky_structure_validation():
    with pytest.raises(ConfigurationError):
        points_1d([1.0, 0.0])           # not increasing
    with pytest.raises(ConfigurationError):
        points_1d([0.0], 0.0)           # weight must be positive
    with pytest.raises(ConfigurationError):
        rect_boundary_2d(1, -1, -1, 1)  # a1 >= b1
    assert points_1d([0.0, 0.5, 2.0]).min_gap == pytest.approx(0.5)


def test_region_dimension_mismatch(gauss2):
    with pytest.raises(ContractViolation):
        rho_mu_mass(gauss2, None, (-1.0, 1.0))

import math
from fractions import Fraction

import numpy as np
import pytest

from sticky_dbm.dirichlet import (apply_generator, energy_form,
                                  energy_measure_density, generator_pairing,
                                  symmetry_residual)
from sticky_dbm.errors import ContractViolation
from sticky_dbm.measure import (constant_density, gaussian_density, points_1d,
                                rect_boundary_2d)
from sticky_dbm.testfunctions import combine, default_catalog

A1 = points_1d([0.0], 1.0)
U2 = rect_boundary_2d(-1, 1, -1, 1, 1.0)
ONE1 = constant_density(1)
GAUSS1 = gaussian_density(1)

CAT1 = default_catalog(A1)
CAT2 = default_catalog(U2)

# integral of ((1-x^2)(1-5x^2))^2 over [-1, 1], exact polynomial integration
KINK_ENERGY = float(2 * (Fraction(1) - Fraction(4) + Fraction(46, 5)
                         - Fraction(60, 7) + Fraction(25, 9)))


def test_energy_zero_function():
    zero = combine(CAT1["kink"], CAT1["kink"], 1.0, -1.0)
    assert energy_form(zero, zero, ONE1, A1) == pytest.approx(0.0, abs=1e-14)


def test_energy_kink_exact_polynomial():
    f = CAT1["kink"]
    assert energy_form(f, f, ONE1, A1) == pytest.approx(KINK_ENERGY, rel=1e-12)


def test_energy_symmetric_in_arguments():
    rng = np.random.default_rng(3)
    names = sorted(CAT1)
    for _ in range(10):
        a, b = rng.choice(names, size=2)
        lhs = energy_form(CAT1[a], CAT1[b], GAUSS1, A1)
        rhs = energy_form(CAT1[b], CAT1[a], GAUSS1, A1)
        assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


def test_generator_values_1d():
    gen = apply_generator(CAT1["kink"], ONE1, A1)
    assert gen.on_A([0.0]) == pytest.approx(2.0)
    assert gen.off_A([0.5]) == pytest.approx(-3.5)
    # gaussian drift: f'' + f' * (-2x)
    gen_g = apply_generator(CAT1["kink"], GAUSS1, A1)
    fprime = (1 - 0.25) * (1 - 1.25)
    assert gen_g.off_A([0.5]) == pytest.approx(-3.5 + fprime * (-1.0))


def test_generator_weight_division():
    for w in (0.5, 2.0):
        gen = apply_generator(CAT1["kink"], ONE1, points_1d([0.0], w))
        assert gen.on_A([0.0]) == pytest.approx(2.0 / w)


def test_generator_smooth_function_zero_jump():
    for name in ("smooth", "bump", "even"):
        gen = apply_generator(CAT1[name], GAUSS1, A1)
        assert gen.on_A([0.0]) == pytest.approx(0.0, abs=1e-12)


def test_generator_linearity():
    f, g = CAT1["kink"], CAT1["bump"]
    gen_f = apply_generator(f, GAUSS1, A1)
    gen_g = apply_generator(g, GAUSS1, A1)
    rng = np.random.default_rng(11)
    for _ in range(5):
        a, b = rng.normal(size=2)
        gen_h = apply_generator(combine(f, g, a, b), GAUSS1, A1)
        for x in ([0.3], [-0.7], [0.9]):
            expect = a * gen_f.off_A(x) + b * gen_g.off_A(x)
            assert gen_h.off_A(x) == pytest.approx(expect,
                                                   abs=1e-10 * (1 + abs(expect)))
        assert gen_h.on_A([0.0]) == pytest.approx(
            a * gen_f.on_A([0.0]) + b * gen_g.on_A([0.0]), abs=1e-10)


def test_generator_missing_one_sided_raises():
    f = combine(CAT1["kink"], CAT1["kink"], 1.0, 0.0)
    object.__setattr__(f, "one_sided", None)
    with pytest.raises(ContractViolation):
        apply_generator(f, ONE1, A1)


def test_generator_off_sticky_point_raises():
    gen = apply_generator(CAT1["kink"], ONE1, A1)
    with pytest.raises(ContractViolation):
        gen.on_A([0.25])


def test_symmetry_residual_1d():
    f = CAT1["kink"]
    tol = 1e-8 * (1 + abs(energy_form(f, f, GAUSS1, A1)))
    for g in ("bump", "smooth", "even", "bump_off"):
        assert symmetry_residual(f, CAT1[g], GAUSS1, A1) <= tol


def test_symmetry_residual_zero_function():
    zero = combine(CAT1["kink"], CAT1["kink"], 1.0, -1.0)
    assert symmetry_residual(zero, CAT1["bump"], GAUSS1, A1) <= 1e-14


def test_generator_bounded_on_probes():
    gen = apply_generator(CAT1["kink"], GAUSS1, A1)
    probes = np.linspace(-1.5, 1.5, 31)
    vals = [gen.off_A([x]) for x in probes if abs(x) > 1e-9]
    assert np.all(np.isfinite(vals)) and np.max(np.abs(vals)) < 50
    assert math.isfinite(gen.on_A([0.0]))


def test_symmetry_residual_2d():
    assert symmetry_residual(CAT2["kink"], CAT2["bump"], constant_density(2), U2) <= 1e-6
    assert symmetry_residual(CAT2["kink"], CAT2["bump"], gaussian_density(2), U2) <= 1e-6


def test_symmetry_residual_weight_independent():
    f, g = CAT1["kink"], CAT1["bump"]
    pairings = []
    for w in (0.5, 1.0, 2.0):
        sticky = points_1d([0.0], w)
        assert symmetry_residual(f, g, GAUSS1, sticky) <= 1e-8
        pairings.append(generator_pairing(f, g, GAUSS1, sticky))
    # the w in the jump term cancels against the atom weight in the pairing
    assert pairings[0] == pytest.approx(pairings[1], rel=1e-10)
    assert pairings[1] == pytest.approx(pairings[2], rel=1e-10)


def test_energy_measure_density_values():
    dens = energy_measure_density(CAT1["kink"], ONE1, A1)
    assert dens([0.5]) == pytest.approx(0.0703125)
    assert dens([0.0]) == 0.0     # indicator kills the sticky set
    assert dens([2.0]) == 0.0     # outside the support
    zero = combine(CAT1["kink"], CAT1["kink"], 1.0, -1.0)
    dens0 = energy_measure_density(zero, ONE1, A1)
    assert dens0([0.3]) == pytest.approx(0.0, abs=1e-14)


def test_energy_nonnegative():
    for name, f in CAT1.items():
        assert energy_form(f, f, GAUSS1, A1) >= 0.0
        dens = energy_measure_density(f, GAUSS1, A1)
        for x in np.linspace(-1.5, 1.5, 11):
            assert dens([x]) >= 0.0

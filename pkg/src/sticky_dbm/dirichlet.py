"""The bilinear energy form, the explicit generator, and the energy measure.

The generator acts on catalog test functions as a second-order operator off
the sticky set plus a derivative-jump term on it; pairing the generator
against a second function in L^2(rho*mu) reproduces the energy form, and the
residual of that identity is the main verification target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation
from .measure import (POINTS_1D, Density, StickyStructure,
                      nearest_sticky_distance, surface_quadrature)
from .quadrature import integrate_1d, integrate_2d
from .testfunctions import TestFunction

_ON_A_TOL = 1e-12

# 2d pairings are verified at 1e-6 absolute; these looser interior tolerances
# keep the iterated quadrature two orders below that at tractable cost.
_TOL_2D = {"abs_tol": 1e-9, "rel_tol": 5e-8}


@dataclass(frozen=True)
class GeneratorValue:
    """Generator applied to a test function: bulk part off A, jump part on A."""

    off_A: Callable[[np.ndarray], float]
    on_A: Callable[[np.ndarray], float]


def _support_interval(f: TestFunction, g: TestFunction, axis: int):
    lo = max(f.support_center[axis] - f.support_radius,
             g.support_center[axis] - g.support_radius)
    hi = min(f.support_center[axis] + f.support_radius,
             g.support_center[axis] + g.support_radius)
    return lo, hi


def _axis_splits(sticky, axis, *fns):
    pts = set()
    for fn in fns:
        pts.update(fn.axis_breakpoints[axis])
    if sticky is not None:
        if sticky.variant == POINTS_1D:
            pts.update(sticky.points)
        else:
            a1, b1, a2, b2 = sticky.rect
            pts.update((a1, b1) if axis == 0 else (a2, b2))
    return tuple(sorted(pts))


def energy_form(f: TestFunction, g: TestFunction, density: Density,
                sticky: StickyStructure | None = None) -> float:
    """E(f, g) = integral of <grad f, grad g> rho over R^d (split at A)."""
    if f.dim != g.dim or f.dim != density.dim:
        raise ContractViolation("dimension mismatch in energy_form")
    if f.dim == 1:
        lo, hi = _support_interval(f, g, 0)
        if hi <= lo:
            return 0.0
        return integrate_1d(
            lambda x: float(f.grad([x])[0]) * float(g.grad([x])[0]) * density([x]),
            lo, hi, _axis_splits(sticky, 0, f, g))
    x0, x1 = _support_interval(f, g, 0)
    y0, y1 = _support_interval(f, g, 1)
    if x1 <= x0 or y1 <= y0:
        return 0.0

    def integrand(x, y):
        p = np.array([x, y])
        return float(np.dot(f.grad(p), g.grad(p))) * density(p)

    return integrate_2d(integrand, ((x0, x1), (y0, y1)),
                        _axis_splits(sticky, 0, f, g), _axis_splits(sticky, 1, f, g),
                        **_TOL_2D)


def apply_generator(f: TestFunction, density: Density,
                    sticky: StickyStructure) -> GeneratorValue:
    """Explicit generator: Delta f + <grad f, grad ln rho> off A; the one-sided
    derivative jump divided by the local atom/surface weight on A.

    Unit weights reproduce the plain jump; the division keeps the pairing
    identity exact for every weight.
    """
    if f.dim != density.dim or f.dim != sticky.dim:
        raise ContractViolation("dimension mismatch in apply_generator")
    if f.one_sided is None:
        raise ContractViolation(f"{f.name}: one-sided derivative data missing")

    def off_A(p):
        p = np.asarray(p, dtype=float).reshape(-1)
        return f.lap(p) + float(np.dot(f.grad(p), density.grad_log(p)))

    if sticky.variant == POINTS_1D:
        pts = np.asarray(sticky.points)
        ws = np.asarray(sticky.weights)

        def on_A(p):
            x = float(np.asarray(p).reshape(-1)[0])
            k = int(np.argmin(np.abs(pts - x)))
            if abs(pts[k] - x) > _ON_A_TOL:
                raise ContractViolation(f"{x} is not a sticky point")
            outer, inner = f.one_sided(np.array([pts[k]]))
            return (outer - inner) / ws[k]
    else:
        w = sticky.w_surf

        def on_A(p):
            p = np.asarray(p, dtype=float).reshape(-1)
            if nearest_sticky_distance(sticky, p) > _ON_A_TOL:
                raise ContractViolation(f"{p} is not on the sticky boundary")
            outer, inner = f.one_sided(p)
            return (outer - inner) / w

    return GeneratorValue(off_A=off_A, on_A=on_A)


def generator_pairing(f: TestFunction, g: TestFunction, density: Density,
                      sticky: StickyStructure) -> float:
    """<L f, g> in L^2(rho*mu): bulk part against rho*lambda^d plus the jump
    part against the rho-weighted atomic/surface measure."""
    gen = apply_generator(f, density, sticky)

    if f.dim == 1:
        lo, hi = _support_interval(f, g, 0)
        bulk = 0.0
        if hi > lo:
            bulk = integrate_1d(
                lambda x: gen.off_A([x]) * g([x]) * density([x]),
                lo, hi, _axis_splits(sticky, 0, f, g))
        atoms = sum(
            w * density([p]) * gen.on_A([p]) * g([p])
            for p, w in zip(sticky.points, sticky.weights))
        return bulk + atoms

    x0, x1 = _support_interval(f, g, 0)
    y0, y1 = _support_interval(f, g, 1)
    bulk = 0.0
    if x1 > x0 and y1 > y0:
        def integrand(x, y):
            p = np.array([x, y])
            return gen.off_A(p) * g(p) * density(p)

        bulk = integrate_2d(integrand, ((x0, x1), (y0, y1)),
                            _axis_splits(sticky, 0, f, g), _axis_splits(sticky, 1, f, g),
                            **_TOL_2D)
    edge_breaks = tuple(sorted(set(_axis_splits(None, 0, f, g)) | set(_axis_splits(None, 1, f, g))))
    surface = surface_quadrature(
        density, sticky, lambda p: gen.on_A(p) * g(p), breakpoints=edge_breaks)
    return bulk + surface


def symmetry_residual(f: TestFunction, g: TestFunction, density: Density,
                      sticky: StickyStructure) -> float:
    """| <-L f, g>_(rho mu) - E(f, g) |; zero in exact arithmetic."""
    return abs(-generator_pairing(f, g, density, sticky)
               - energy_form(f, g, density, sticky))


def energy_measure_density(f: TestFunction, density: Density,
                           sticky: StickyStructure) -> Callable[[np.ndarray], float]:
    """Density of the energy measure: 2 |grad f|^2 rho off A, zero on A."""
    if f.dim != density.dim or f.dim != sticky.dim:
        raise ContractViolation("dimension mismatch in energy_measure_density")

    def dens(p):
        p = np.asarray(p, dtype=float).reshape(-1)
        if nearest_sticky_distance(sticky, p) <= _ON_A_TOL:
            return 0.0
        grad = f.grad(p)
        return 2.0 * float(np.dot(grad, grad)) * density(p)

    return dens

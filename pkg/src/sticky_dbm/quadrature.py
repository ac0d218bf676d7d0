"""Adaptive composite Gauss-Legendre quadrature with forced interval splits.

Integrands handled here are smooth between a known, finite set of breakpoints
(sticky points, rectangle edge lines, support boundaries).  The strategy is
therefore: split the domain at every breakpoint, then refine each smooth piece
adaptively by interval halving until two nested Gauss estimates agree.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalFailure

ABS_TOL = 1e-12
REL_TOL = 1e-10

# 10- and 21-point Gauss-Legendre rules on [-1, 1]; the coarse/fine pair drives
# the local error estimate.
_X10, _W10 = np.polynomial.legendre.leggauss(10)
_X21, _W21 = np.polynomial.legendre.leggauss(21)

_MAX_DEPTH = 48


def _gauss(f, a, b, nodes, weights):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    total = 0.0
    for x, w in zip(nodes, weights):
        total += w * f(mid + half * x)
    return half * total


def _adaptive(f, a, b, tol, depth):
    coarse = _gauss(f, a, b, _X10, _W10)
    fine = _gauss(f, a, b, _X21, _W21)
    if not math.isfinite(fine) or not math.isfinite(coarse):
        raise NumericalFailure(f"non-finite quadrature value on [{a}, {b}]")
    err = abs(fine - coarse)
    if err <= tol or depth >= _MAX_DEPTH:
        return fine
    mid = 0.5 * (a + b)
    half_tol = 0.5 * tol
    return _adaptive(f, a, mid, half_tol, depth + 1) + _adaptive(f, mid, b, half_tol, depth + 1)


def split_points(a, b, breakpoints):
    """Sorted subdivision of [a, b] at every interior breakpoint."""
    pts = [a, b]
    for p in breakpoints:
        if a < p < b:
            pts.append(float(p))
    pts = sorted(set(pts))
    return pts

def integrate_1d(f, a, b, breakpoints=(), abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """Integrate a scalar callable over [a, b], splitting at the breakpoints."""
    if b <= a:
        return 0.0
    pts = split_points(a, b, breakpoints)
    # First pass fixes the tolerance scale from a rough magnitude estimate.
    rough = sum(abs(_gauss(f, lo, hi, _X10, _W10)) for lo, hi in zip(pts, pts[1:]))
    tol = max(abs_tol, rel_tol * rough)
    n_pieces = len(pts) - 1
    total = 0.0
    for lo, hi in zip(pts, pts[1:]):
        total += _adaptive(f, lo, hi, tol / n_pieces, 0)
    if not math.isfinite(total):
        raise NumericalFailure("non-finite 1d quadrature result")
    return float(total)


def integrate_2d(f, box, breakpoints_x=(), breakpoints_y=(),
                 abs_tol=ABS_TOL, rel_tol=REL_TOL):
    """Iterated integral of f(x, y) over an axis-aligned box ((x0, x1), (y0, y1)).

    The inner (y) integral runs at a tighter tolerance so its error does not
    pollute the outer adaptive estimate.
    """
    (x0, x1), (y0, y1) = box
    if x1 <= x0 or y1 <= y0:
        return 0.0
    inner_abs = abs_tol * 0.1
    inner_rel = rel_tol * 0.1

    def outer(x):
        return integrate_1d(lambda y: f(x, y), y0, y1, breakpoints_y,
                            abs_tol=inner_abs, rel_tol=inner_rel)

    return integrate_1d(outer, x0, x1, breakpoints_x,
                        abs_tol=abs_tol, rel_tol=rel_tol)

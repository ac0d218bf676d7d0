"""Catalog of compactly supported test functions with hand-coded derivatives.

Every catalog entry is continuous on R^d, twice continuously differentiable
off the sticky set, and carries explicit one-sided derivative data on the
sticky set.  Generic interpolation cannot certify that regularity, hence the
closed catalog.

1d entries are built around a designated kink location (placed on a sticky
point); 2d entries are built around a sticky rectangle.  The separable profile
(1 - u^2)(1 - v^2) is used for the 2d kink entry because a literal
distance-to-boundary tent is not C^1 off the boundary: the distance function
of a rectangle has gradient kinks on the diagonals through the corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation
from .measure import POINTS_1D, RECT_BOUNDARY_2D, StickyStructure


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported function, C^2 off A, with one-sided data on A.

    ``one_sided(p)`` returns the pair (outer, inner): in 1d the right and left
    derivative limits at a sticky point, in 2d the outward-normal derivative
    extensions from outside resp. inside the rectangle.
    """

    dim: int
    name: str
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian_trace: Callable[[np.ndarray], float]
    one_sided: Callable[[np.ndarray], tuple[float, float]]
    support_center: tuple[float, ...]
    support_radius: float
    axis_breakpoints: tuple[tuple[float, ...], ...]

    def __call__(self, p) -> float:
        return float(self.value(np.asarray(p, dtype=float)))

    def grad(self, p) -> np.ndarray:
        return np.asarray(self.gradient(np.asarray(p, dtype=float)), dtype=float).reshape(self.dim)

    def lap(self, p) -> float:
        return float(self.hessian_trace(np.asarray(p, dtype=float)))


def _scale(fn: TestFunction, factor: float) -> TestFunction:
    """factor * fn, used by linearity checks."""
    return TestFunction(
        dim=fn.dim,
        name=f"{factor}*{fn.name}",
        value=lambda p: factor * fn.value(p),
        gradient=lambda p: factor * np.asarray(fn.gradient(p)),
        hessian_trace=lambda p: factor * fn.hessian_trace(p),
        one_sided=lambda p: tuple(factor * s for s in fn.one_sided(p)),
        support_center=fn.support_center,
        support_radius=fn.support_radius,
        axis_breakpoints=fn.axis_breakpoints,
    )


def combine(a: TestFunction, b: TestFunction, ca: float = 1.0, cb: float = 1.0) -> TestFunction:
    """Linear combination ca*a + cb*b (same dimension)."""
    if a.dim != b.dim:
        raise ContractViolation("cannot combine test functions of different dimension")
    center = tuple(0.5 * (x + y) for x, y in zip(a.support_center, b.support_center))
    spread = math.dist(a.support_center, b.support_center)
    return TestFunction(
        dim=a.dim,
        name=f"{ca}*{a.name}+{cb}*{b.name}",
        value=lambda p: ca * a.value(p) + cb * b.value(p),
        gradient=lambda p: ca * np.asarray(a.gradient(p)) + cb * np.asarray(b.gradient(p)),
        hessian_trace=lambda p: ca * a.hessian_trace(p) + cb * b.hessian_trace(p),
        one_sided=lambda p: tuple(
            ca * sa + cb * sb for sa, sb in zip(a.one_sided(p), b.one_sided(p))),
        support_center=center,
        support_radius=0.5 * spread + max(a.support_radius, b.support_radius),
        axis_breakpoints=tuple(
            tuple(sorted(set(ba) | set(bb)))
            for ba, bb in zip(a.axis_breakpoints, b.axis_breakpoints)),
    )


# ---------------------------------------------------------------------------
# 1d entries
# ---------------------------------------------------------------------------

def kink_tent_1d(center=0.0, half_width=1.0, amplitude=1.0) -> TestFunction:
    """A |u| (1-u^2)^2 with u = (x-center)/half_width: derivative jump at center.

    Right/left derivative limits at the kink are +-amplitude/half_width.
    """
    c, r, A = float(center), float(half_width), float(amplitude)

    def val(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return 0.0
        return A * abs(u) * (1.0 - u * u) ** 2

    def deriv(u):
        # derivative in u for u > 0; odd reflection handles u < 0
        return (1.0 - u * u) * (1.0 - 5.0 * u * u)

    def grad(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0 or u == 0.0:
            return np.zeros(1)
        s = 1.0 if u > 0 else -1.0
        return np.array([s * A * deriv(abs(u)) / r])

    def lap(p):
        # f is even, so its second derivative is even as well
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return 0.0
        au = abs(u)
        return A * (-12.0 * au + 20.0 * au ** 3) / (r * r)

    def one_sided(p):
        x = float(np.asarray(p).reshape(-1)[0])
        if abs(x - c) < 1e-12:
            return (A / r, -A / r)
        g = float(grad(np.array([x]))[0])
        return (g, g)

    return TestFunction(1, f"kink_tent(c={c})", val, grad, lap, one_sided,
                        (c,), r, ((c - r, c, c + r),))


def smooth_well_1d(center=0.0, half_width=1.0, amplitude=1.0) -> TestFunction:
    """A u (1-u^2)^2: odd, C^2 across the center (no derivative jump)."""
    c, r, A = float(center), float(half_width), float(amplitude)

    def val(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return 0.0
        return A * u * (1.0 - u * u) ** 2

    def grad(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return np.zeros(1)
        return np.array([A * (1.0 - u * u) * (1.0 - 5.0 * u * u) / r])

    def lap(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return 0.0
        return A * (-12.0 * u + 20.0 * u ** 3) / (r * r)

    def one_sided(p):
        g = float(grad(np.asarray(p).reshape(-1))[0])
        return (g, g)

    return TestFunction(1, f"smooth_well(c={c})", val, grad, lap, one_sided,
                        (c,), r, ((c - r, c + r),))


def _bump_profile(u):
    if abs(u) >= 1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - u * u))


def _bump_d1(u):
    if abs(u) >= 1.0:
        return 0.0
    s = 1.0 - u * u
    return _bump_profile(u) * (-2.0 * u / (s * s))


def _bump_d2(u):
    if abs(u) >= 1.0:
        return 0.0
    s = 1.0 - u * u
    a = -2.0 * u / (s * s)
    da = -2.0 / (s * s) - 8.0 * u * u / (s ** 3)
    return _bump_profile(u) * (a * a + da)


def bump_1d(center=0.0, half_width=1.0, amplitude=1.0) -> TestFunction:
    """Standard C-infinity bump exp(1 - 1/(1-u^2)), amplitude at the center."""
    c, r, A = float(center), float(half_width), float(amplitude)

    def val(p):
        return A * _bump_profile((float(p[0]) - c) / r)

    def grad(p):
        return np.array([A * _bump_d1((float(p[0]) - c) / r) / r])

    def lap(p):
        return A * _bump_d2((float(p[0]) - c) / r) / (r * r)

    def one_sided(p):
        g = float(grad(np.asarray(p).reshape(-1))[0])
        return (g, g)

    return TestFunction(1, f"bump(c={c},r={r})", val, grad, lap, one_sided,
                        (c,), r, ((c - r, c + r),))


def even_quartic_1d(center=0.0, half_width=1.0, amplitude=1.0) -> TestFunction:
    """A (1-u^2)^2: even around the center, C^1 at the support boundary."""
    c, r, A = float(center), float(half_width), float(amplitude)

    def val(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return 0.0
        return A * (1.0 - u * u) ** 2

    def grad(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return np.zeros(1)
        return np.array([-4.0 * A * u * (1.0 - u * u) / r])

    def lap(p):
        u = (float(p[0]) - c) / r
        if abs(u) >= 1.0:
            return 0.0
        return A * (-4.0 + 12.0 * u * u) / (r * r)

    def one_sided(p):
        g = float(grad(np.asarray(p).reshape(-1))[0])
        return (g, g)

    return TestFunction(1, f"even_quartic(c={c})", val, grad, lap, one_sided,
                        (c,), r, ((c - r, c + r),))


# ---------------------------------------------------------------------------
# 2d entries
# ---------------------------------------------------------------------------

def _smoothstep(t):
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d1(t):
    return t * t * (30.0 + t * (-60.0 + 30.0 * t))


def _smoothstep_d2(t):
    return t * (60.0 + t * (-180.0 + 120.0 * t))


class _Plateau1d:
    """C^2 cutoff of |x - c|: 1 inside r0, 0 outside r1, quintic blend between."""

    def __init__(self, center, r0, r1):
        self.c = float(center)
        self.r0 = float(r0)
        self.r1 = float(r1)

    def _t(self, s):
        return (s - self.r0) / (self.r1 - self.r0)

    def value(self, x):
        s = abs(x - self.c)
        if s <= self.r0:
            return 1.0
        if s >= self.r1:
            return 0.0
        return 1.0 - _smoothstep(self._t(s))

    def d1(self, x):
        s = abs(x - self.c)
        if s <= self.r0 or s >= self.r1:
            return 0.0
        sign = 1.0 if x > self.c else -1.0
        return -sign * _smoothstep_d1(self._t(s)) / (self.r1 - self.r0)

    def d2(self, x):
        s = abs(x - self.c)
        if s <= self.r0 or s >= self.r1:
            return 0.0
        return -_smoothstep_d2(self._t(s)) / (self.r1 - self.r0) ** 2


class _PlateauBox:
    """Separable C^2 cutoff a(x) b(y): 1 on a rectangle neighbourhood, compactly
    supported, with all non-smooth lines axis-aligned (quadrature splits there).
    """

    def __init__(self, center, half_widths, margin):
        cx, cy = center
        hx, hy = half_widths
        self.ax = _Plateau1d(cx, hx + 0.25 * margin, hx + margin)
        self.ay = _Plateau1d(cy, hy + 0.25 * margin, hy + margin)

    def value(self, p):
        return self.ax.value(float(p[0])) * self.ay.value(float(p[1]))

    def gradient(self, p):
        x, y = float(p[0]), float(p[1])
        return np.array([self.ax.d1(x) * self.ay.value(y),
                         self.ax.value(x) * self.ay.d1(y)])

    def laplacian(self, p):
        x, y = float(p[0]), float(p[1])
        return (self.ax.d2(x) * self.ay.value(y)
                + self.ax.value(x) * self.ay.d2(y))

    @property
    def x_breaks(self):
        return (self.ax.c - self.ax.r1, self.ax.c - self.ax.r0,
                self.ax.c + self.ax.r0, self.ax.c + self.ax.r1)

    @property
    def y_breaks(self):
        return (self.ay.c - self.ay.r1, self.ay.c - self.ay.r0,
                self.ay.c + self.ay.r0, self.ay.c + self.ay.r1)


class _RectProfile:
    """q(x, y) = (1-u^2)(1-v^2) in rectangle-normalized coordinates."""

    def __init__(self, rect):
        a1, b1, a2, b2 = rect
        self.cx, self.cy = 0.5 * (a1 + b1), 0.5 * (a2 + b2)
        self.hx, self.hy = 0.5 * (b1 - a1), 0.5 * (b2 - a2)

    def uv(self, p):
        return (float(p[0]) - self.cx) / self.hx, (float(p[1]) - self.cy) / self.hy

    def value(self, p):
        u, v = self.uv(p)
        return (1.0 - u * u) * (1.0 - v * v)

    def gradient(self, p):
        u, v = self.uv(p)
        return np.array([-2.0 * u * (1.0 - v * v) / self.hx,
                         -2.0 * v * (1.0 - u * u) / self.hy])

    def laplacian(self, p):
        u, v = self.uv(p)
        return -2.0 * (1.0 - v * v) / self.hx ** 2 - 2.0 * (1.0 - u * u) / self.hy ** 2

    def inner_normal_derivative(self, p):
        """Outward-normal derivative of q on the edge through p (from inside)."""
        u, v = self.uv(p)
        if abs(abs(u) - 1.0) <= abs(abs(v) - 1.0):  # vertical edge x = cx +- hx
            return -2.0 * (1.0 - v * v) / self.hx
        return -2.0 * (1.0 - u * u) / self.hy


def boundary_kink_2d(rect, beta=-0.5, outer_margin=1.0, amplitude=1.0) -> TestFunction:
    """Separable profile q inside the rectangle, beta*q*cutoff outside.

    Continuous across the boundary (both branches vanish there); the
    outward-normal derivative jumps by the factor (beta - 1).  The radial
    cutoff is identically 1 on a neighbourhood of the closed rectangle, so it
    never touches the one-sided data.
    """
    a1, b1, a2, b2 = (float(v) for v in rect)
    q = _RectProfile((a1, b1, a2, b2))
    A, beta = float(amplitude), float(beta)
    chi = _PlateauBox((q.cx, q.cy), (q.hx, q.hy), outer_margin)

    def inside(p):
        return a1 <= p[0] <= b1 and a2 <= p[1] <= b2

    def val(p):
        if inside(p):
            return A * q.value(p)
        return A * beta * q.value(p) * chi.value(p)

    def grad(p):
        if inside(p):
            return A * q.gradient(p)
        c = chi.value(p)
        if c == 0.0:
            return np.zeros(2)
        return A * beta * (c * q.gradient(p) + q.value(p) * chi.gradient(p))

    def lap(p):
        if inside(p):
            return A * q.laplacian(p)
        c = chi.value(p)
        if c == 0.0:
            return 0.0
        return A * beta * (c * q.laplacian(p)
                           + 2.0 * float(np.dot(q.gradient(p), chi.gradient(p)))
                           + q.value(p) * chi.laplacian(p))

    def one_sided(p):
        nd_in = A * q.inner_normal_derivative(np.asarray(p, dtype=float))
        return (beta * nd_in, nd_in)

    radius = math.hypot(q.hx + outer_margin, q.hy + outer_margin)
    return TestFunction(
        2, f"boundary_kink(beta={beta})", val, grad, lap, one_sided,
        (q.cx, q.cy), radius,
        ((a1, b1) + chi.x_breaks, (a2, b2) + chi.y_breaks))


def smooth_rect_2d(rect, outer_margin=1.0, amplitude=1.0) -> TestFunction:
    """q * cutoff everywhere: C^2 on R^2, no derivative jump on the boundary."""
    a1, b1, a2, b2 = (float(v) for v in rect)
    q = _RectProfile((a1, b1, a2, b2))
    A = float(amplitude)
    chi = _PlateauBox((q.cx, q.cy), (q.hx, q.hy), outer_margin)

    def val(p):
        c = chi.value(p)
        return 0.0 if c == 0.0 else A * q.value(p) * c

    def grad(p):
        c = chi.value(p)
        if c == 0.0:
            return np.zeros(2)
        return A * (c * q.gradient(p) + q.value(p) * chi.gradient(p))

    def lap(p):
        c = chi.value(p)
        if c == 0.0:
            return 0.0
        return A * (c * q.laplacian(p)
                    + 2.0 * float(np.dot(q.gradient(p), chi.gradient(p)))
                    + q.value(p) * chi.laplacian(p))

    def one_sided(p):
        nd = A * q.inner_normal_derivative(np.asarray(p, dtype=float))
        return (nd, nd)

    radius = math.hypot(q.hx + outer_margin, q.hy + outer_margin)
    return TestFunction(
        2, "smooth_rect", val, grad, lap, one_sided,
        (q.cx, q.cy), radius,
        ((a1, b1) + chi.x_breaks, (a2, b2) + chi.y_breaks))


def bump_2d(center=(0.0, 0.0), half_widths=(1.0, 1.0), amplitude=1.0,
            rect=None) -> TestFunction:
    """Product of 1d C-infinity bumps; smooth everywhere.

    When ``rect`` is given, its edge lines are added to the quadrature
    breakpoints (the function itself is smooth across them) and the one-sided
    data evaluates the outward-normal derivative on that rectangle.
    """
    cx, cy = (float(v) for v in center)
    rx, ry = (float(v) for v in half_widths)
    A = float(amplitude)
    q = _RectProfile(rect) if rect is not None else None

    def val(p):
        return A * _bump_profile((float(p[0]) - cx) / rx) * _bump_profile((float(p[1]) - cy) / ry)

    def grad(p):
        u, v = (float(p[0]) - cx) / rx, (float(p[1]) - cy) / ry
        return np.array([A * _bump_d1(u) * _bump_profile(v) / rx,
                         A * _bump_profile(u) * _bump_d1(v) / ry])

    def lap(p):
        u, v = (float(p[0]) - cx) / rx, (float(p[1]) - cy) / ry
        return A * (_bump_d2(u) * _bump_profile(v) / rx ** 2
                    + _bump_profile(u) * _bump_d2(v) / ry ** 2)

    def one_sided(p):
        p = np.asarray(p, dtype=float)
        g = grad(p)
        if q is None:
            raise ContractViolation("bump_2d one-sided data needs a rectangle")
        u, v = q.uv(p)
        if abs(abs(u) - 1.0) <= abs(abs(v) - 1.0):
            nu = np.array([math.copysign(1.0, u), 0.0])
        else:
            nu = np.array([0.0, math.copysign(1.0, v)])
        nd = float(np.dot(nu, g))
        return (nd, nd)

    bx = [cx - rx, cx + rx]
    by = [cy - ry, cy + ry]
    if rect is not None:
        a1, b1, a2, b2 = rect
        bx += [a1, b1]
        by += [a2, b2]
    return TestFunction(2, f"bump2d(c=({cx},{cy}))", val, grad, lap, one_sided,
                        (cx, cy), math.hypot(rx, ry),
                        (tuple(sorted(bx)), tuple(sorted(by))))


# ---------------------------------------------------------------------------
# catalog assembly and validation
# ---------------------------------------------------------------------------

def default_catalog(sticky: StickyStructure) -> dict[str, TestFunction]:
    """Named test functions adapted to the given sticky structure.

    1d kinks are placed on the first sticky point; 2d entries are built around
    the sticky rectangle.
    """
    if sticky.variant == POINTS_1D:
        c = sticky.points[0]
        return {
            "kink": kink_tent_1d(center=c),
            "smooth": smooth_well_1d(center=c),
            "bump": bump_1d(center=c, half_width=1.0),
            "bump_off": bump_1d(center=c + 0.35, half_width=0.6, amplitude=0.8),
            "even": even_quartic_1d(center=c),
        }
    if sticky.variant == RECT_BOUNDARY_2D:
        rect = sticky.rect
        cx = 0.5 * (rect[0] + rect[1])
        cy = 0.5 * (rect[2] + rect[3])
        width = max(rect[1] - rect[0], rect[3] - rect[2])
        return {
            "kink": boundary_kink_2d(rect),
            "kink_steep": boundary_kink_2d(rect, beta=-1.5, amplitude=0.7),
            "smooth": smooth_rect_2d(rect),
            "bump": bump_2d(center=(cx, cy), half_widths=(1.2 * width, 1.2 * width), rect=rect),
            "bump_off": bump_2d(center=(cx + 0.3 * width, cy), half_widths=(0.8 * width, width),
                                amplitude=0.8, rect=rect),
        }
    raise ContractViolation(f"no catalog for sticky variant {sticky.variant!r}")


def _sticky_probes(sticky: StickyStructure, n_per_component: int, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """(point on A, outward direction) pairs used by validation probes."""
    probes = []
    if sticky.variant == POINTS_1D:
        for p in sticky.points:
            for _ in range(n_per_component):
                probes.append((np.array([p]), np.array([1.0])))
    else:
        a1, b1, a2, b2 = sticky.rect
        for _ in range(n_per_component):
            t = rng.uniform(a1, b1)
            probes.append((np.array([t, a2]), np.array([0.0, -1.0])))
            probes.append((np.array([t, b2]), np.array([0.0, 1.0])))
            s = rng.uniform(a2, b2)
            probes.append((np.array([a1, s]), np.array([-1.0, 0.0])))
            probes.append((np.array([b1, s]), np.array([1.0, 0.0])))
    return probes


def validate_test_function(fn: TestFunction, sticky: StickyStructure,
                           n_probes: int = 20, seed: int = 0,
                           step: float = 1e-5, cont_tol: float = 1e-9,
                           fd_rel_tol: float = 1e-4):
    """Check continuity across A, one-sided data against one-sided differences,
    and vanishing outside the support radius.  Raises on violation."""
    rng = np.random.default_rng(seed)
    center = np.asarray(fn.support_center)

    for p, nu in _sticky_probes(sticky, n_probes, rng):
        # linear extrapolation removes the O(step) drift from the limit estimate
        outer_v = 2.0 * fn.value(p + step * nu) - fn.value(p + 2 * step * nu)
        inner_v = 2.0 * fn.value(p - step * nu) - fn.value(p - 2 * step * nu)
        if abs(outer_v - inner_v) > cont_tol * (1 + abs(outer_v)) + 1e-8:
            raise ContractViolation(
                f"{fn.name}: value jump across A at {p}: {outer_v} vs {inner_v}")
        outer_d, inner_d = fn.one_sided(p)
        fd_outer = (fn.value(p + step * nu) - fn.value(p)) / step
        fd_inner = (fn.value(p) - fn.value(p - step * nu)) / step
        for got, fd in ((outer_d, fd_outer), (inner_d, fd_inner)):
            if abs(got - fd) > fd_rel_tol * (1.0 + abs(got)):
                raise ContractViolation(
                    f"{fn.name}: one-sided data {got} vs finite difference {fd} at {p}")

    for _ in range(n_probes):
        direction = rng.normal(size=fn.dim)
        direction /= np.linalg.norm(direction)
        p = center + direction * fn.support_radius * rng.uniform(1.0001, 2.0)
        if abs(fn.value(p)) > 0 or np.any(fn.grad(p) != 0) or fn.lap(p) != 0:
            raise ContractViolation(f"{fn.name}: does not vanish outside support at {p}")

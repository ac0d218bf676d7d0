"""Densities, sticky sets, and the composite measure rho*mu.

The reference measure is mu = lambda^d + S, where S is either a finite sum of
weighted point atoms (1d) or a weighted length measure on the boundary of an
axis-aligned rectangle (2d).  All mass computations integrate the strictly
positive density rho against mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, NumericalFailure
from .quadrature import integrate_1d, integrate_2d

POINTS_1D = "Points1D"
RECT_BOUNDARY_2D = "RectBoundary2D"


@dataclass(frozen=True)
class Density:
    """Strictly positive C^1 weight with its log-gradient (the drift field).

    ``integrable`` / ``bounded`` declare integrability w.r.t. lambda^d and
    boundedness; they gate process-level constructions (chains, samplers,
    ergodic targets) but not pointwise generator evaluation.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    log_gradient: Callable[[np.ndarray], np.ndarray]
    integrable: bool
    bounded: bool
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("density dimension must be >= 1")

    def __call__(self, x) -> float:
        v = float(self.value(np.asarray(x, dtype=float)))
        if not (v > 0.0) or not math.isfinite(v):
            raise NumericalFailure(f"density must be finite and positive, got {v} at {x}")
        return v

    def grad_log(self, x) -> np.ndarray:
        return np.asarray(self.log_gradient(np.asarray(x, dtype=float)), dtype=float).reshape(self.dim)


def constant_density(dim: int) -> Density:
    """rho = 1; bounded, not integrable."""
    return Density(
        dim=dim,
        value=lambda x: 1.0,
        log_gradient=lambda x: np.zeros(dim),
        integrable=False,
        bounded=True,
        name="constant",
    )


def gaussian_density(dim: int) -> Density:
    """rho(x) = exp(-|x|^2); integrable and bounded, log-gradient -2x."""
    return Density(
        dim=dim,
        value=lambda x: math.exp(-float(np.dot(x, x))),
        log_gradient=lambda x: -2.0 * np.asarray(x, dtype=float),
        integrable=True,
        bounded=True,
        name="gaussian",
    )


DENSITY_CATALOG = {"constant": constant_density, "gaussian": gaussian_density}


def require_process_conditions(density: Density):
    """Integrability conditions needed for recurrence/ergodicity of the process.

    d = 1 admits either an integrable or a bounded density; d >= 2 requires
    integrability.  Pure generator evaluation has no such restriction.
    """
    if density.dim == 1:
        if not (density.integrable or density.bounded):
            raise ConfigurationError(
                "1d process construction needs an integrable or bounded density")
    elif not density.integrable:
        raise ConfigurationError(
            f"{density.dim}d process construction needs an integrable density")


@dataclass(frozen=True)
class StickyStructure:
    """The Lebesgue-null set A together with its atomic/surface measure S.

    Points1D: finitely many weighted atoms x_k with weights w_k > 0.
    RectBoundary2D: the boundary of [a1, b1] x [a2, b2] carrying w_surf times
    1d length measure.
    """

    variant: str
    points: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    rect: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)  # a1, b1, a2, b2
    w_surf: float = 0.0

    def __post_init__(self):
        if self.variant == POINTS_1D:
            if not self.points:
                raise ConfigurationError("Points1D needs at least one sticky point")
            if len(self.points) != len(self.weights):
                raise ConfigurationError("points and weights must pair up")
            if any(w <= 0 for w in self.weights):
                raise ConfigurationError("atom weights must be positive")
            if any(b <= a for a, b in zip(self.points, self.points[1:])):
                raise ConfigurationError("sticky points must be strictly increasing")
        elif self.variant == RECT_BOUNDARY_2D:
            a1, b1, a2, b2 = self.rect
            if not (a1 < b1 and a2 < b2):
                raise ConfigurationError("rectangle must satisfy a1 < b1 and a2 < b2")
            if self.w_surf <= 0:
                raise ConfigurationError("w_surf must be positive")
        else:
            raise ConfigurationError(f"unknown sticky variant {self.variant!r}")

    @property
    def dim(self) -> int:
        return 1 if self.variant == POINTS_1D else 2

    @property
    def min_gap(self) -> float:
        """Smallest spacing between consecutive 1d sticky points (inf for one point)."""
        if self.variant != POINTS_1D:
            raise ContractViolation("min_gap is defined for Points1D only")
        if len(self.points) == 1:
            return math.inf
        return min(b - a for a, b in zip(self.points, self.points[1:]))

    def rescaled(self, factor: float) -> "StickyStructure":
        """Same geometry with all atom/surface weights multiplied by factor."""
        if self.variant == POINTS_1D:
            return StickyStructure(POINTS_1D, self.points,
                                   tuple(w * factor for w in self.weights))
        return StickyStructure(RECT_BOUNDARY_2D, rect=self.rect,
                               w_surf=self.w_surf * factor)


def points_1d(points: Sequence[float], weights: Sequence[float] | float = 1.0) -> StickyStructure:
    pts = tuple(float(p) for p in points)
    if isinstance(weights, (int, float)):
        ws = tuple(float(weights) for _ in pts)
    else:
        ws = tuple(float(w) for w in weights)
    return StickyStructure(POINTS_1D, pts, ws)


def rect_boundary_2d(a1, b1, a2, b2, w_surf=1.0) -> StickyStructure:
    return StickyStructure(RECT_BOUNDARY_2D,
                           rect=(float(a1), float(b1), float(a2), float(b2)),
                           w_surf=float(w_surf))


@dataclass(frozen=True)
class TruncationBox:
    """Axis-aligned simulation box [-L_i, L_i] with reflecting outer boundary."""

    half_widths: tuple[float, ...]
    boundary_policy: str = field(default="reflecting", init=False)

    def __post_init__(self):
        if any(L <= 0 for L in self.half_widths):
            raise ConfigurationError("truncation half-widths must be positive")

    @property
    def dim(self) -> int:
        return len(self.half_widths)

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        return tuple((-L, L) for L in self.half_widths)


def truncation_box(L, dim=1) -> TruncationBox:
    if isinstance(L, (int, float)):
        return TruncationBox(tuple(float(L) for _ in range(dim)))
    return TruncationBox(tuple(float(v) for v in L))


def _as_region(region, dim):
    if isinstance(region, TruncationBox):
        if region.dim != dim:
            raise ContractViolation("region dimension mismatch")
        return region.intervals
    region = tuple(region)
    if len(region) == 2 and all(isinstance(v, (int, float)) for v in region):
        region = (region,)
    if len(region) != dim:
        raise ContractViolation("region dimension mismatch")
    out = []
    for interval in region:
        try:
            lo, hi = (float(v) for v in interval)
        except TypeError:
            raise ContractViolation(f"region interval {interval!r} is not a pair")
        if hi < lo:
            raise ContractViolation(f"degenerate region interval ({lo}, {hi})")
        out.append((lo, hi))
    return tuple(out)


def nearest_sticky_distance(sticky: StickyStructure, x) -> float:
    """Euclidean distance from x to A (0 exactly on A)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if sticky.variant == POINTS_1D:
        return min(abs(float(x[0]) - p) for p in sticky.points)
    a1, b1, a2, b2 = sticky.rect
    px, py = float(x[0]), float(x[1])
    if a1 <= px <= b1 and a2 <= py <= b2:
        # inside the closed rectangle: distance to the nearest edge
        return min(px - a1, b1 - px, py - a2, b2 - py)
    dx = max(a1 - px, 0.0, px - b1)
    dy = max(a2 - py, 0.0, py - b2)
    return math.hypot(dx, dy)


def on_sticky(sticky: StickyStructure, x, tol=0.0) -> bool:
    return nearest_sticky_distance(sticky, x) <= tol


def _edges(rect):
    """The four edges as (axis along which the edge runs, fixed coord, lo, hi)."""
    a1, b1, a2, b2 = rect
    return (
        (0, a2, a1, b1),  # bottom: y = a2
        (0, b2, a1, b1),  # top
        (1, a1, a2, b2),  # left: x = a1
        (1, b1, a2, b2),  # right
    )


def surface_quadrature(density: Density, sticky: StickyStructure, integrand,
                       region=None, breakpoints=()) -> float:
    """w_surf * integral of integrand * rho over the rectangle boundary.

    Composite Gauss quadrature edge by edge; corners carry no length and are
    never quadrature nodes, so nothing is double counted.
    """
    if sticky.variant != RECT_BOUNDARY_2D:
        raise ContractViolation("surface_quadrature needs a RectBoundary2D structure")
    clip = _as_region(region, 2) if region is not None else None
    total = 0.0
    for axis, fixed, lo, hi in _edges(sticky.rect):
        if clip is not None:
            (cx0, cx1), (cy0, cy1) = clip
            if axis == 0:
                if not (cy0 <= fixed <= cy1):
                    continue
                lo, hi = max(lo, cx0), min(hi, cx1)
            else:
                if not (cx0 <= fixed <= cx1):
                    continue
                lo, hi = max(lo, cy0), min(hi, cy1)
            if hi <= lo:
                continue

        if axis == 0:
            def line(t, fixed=fixed):
                p = np.array([t, fixed])
                return integrand(p) * density(p)
        else:
            def line(t, fixed=fixed):
                p = np.array([fixed, t])
                return integrand(p) * density(p)
        total += integrate_1d(line, lo, hi, breakpoints)
    return sticky.w_surf * total


def rho_mu_mass(density: Density, sticky: StickyStructure | None, region) -> float:
    """Mass of rho*mu over an axis-aligned region: Lebesgue part plus atoms/surface.

    A degenerate (zero-volume) region contributes only its atomic/surface part.
    """
    dim = density.dim
    iv = _as_region(region, dim)
    degenerate = any(hi <= lo for lo, hi in iv)

    lebesgue = 0.0
    if not degenerate:
        if dim == 1:
            splits = sticky.points if sticky is not None and sticky.variant == POINTS_1D else ()
            lebesgue = integrate_1d(lambda x: density(np.array([x])), iv[0][0], iv[0][1], splits)
        elif dim == 2:
            bx, by = (), ()
            if sticky is not None and sticky.variant == RECT_BOUNDARY_2D:
                a1, b1, a2, b2 = sticky.rect
                bx, by = (a1, b1), (a2, b2)
            lebesgue = integrate_2d(lambda x, y: density(np.array([x, y])), iv, bx, by)
        else:
            raise ContractViolation("rho_mu_mass supports d in {1, 2}")

    atomic = 0.0
    if sticky is not None:
        if sticky.variant == POINTS_1D:
            lo, hi = iv[0]
            for p, w in zip(sticky.points, sticky.weights):
                if lo <= p <= hi:
                    atomic += w * density(np.array([p]))
        else:
            atomic = surface_quadrature(density, sticky, lambda p: 1.0, region=iv)

    total = lebesgue + atomic
    if not math.isfinite(total):
        raise NumericalFailure("rho_mu_mass produced a non-finite value")
    return total


def check_log_gradient(density: Density, box: TruncationBox, sticky: StickyStructure | None = None,
                       n_probes: int = 100, seed: int = 0, step: float = 1e-5,
                       rel_tol: float = 1e-6) -> float:
    """Max relative deviation between log_gradient and central differences of ln(rho).

    Probes are drawn uniformly in the box, skipping points within 10*step of A.
    Raises ConfigurationError when the declared gradient is inconsistent.
    """
    rng = np.random.default_rng(seed)
    dim = density.dim
    worst = 0.0
    drawn = 0
    while drawn < n_probes:
        x = rng.uniform([-0.9 * L for L in box.half_widths],
                        [0.9 * L for L in box.half_widths])
        if sticky is not None and nearest_sticky_distance(sticky, x) < 10 * step:
            continue
        drawn += 1
        g = density.grad_log(x)
        fd = np.empty(dim)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = step
            fd[i] = (math.log(density(x + e)) - math.log(density(x - e))) / (2 * step)
        err = float(np.linalg.norm(g - fd)) / (1.0 + float(np.linalg.norm(g)))
        worst = max(worst, err)
    if worst > rel_tol:
        raise ConfigurationError(
            f"log_gradient disagrees with finite differences of ln(rho): {worst:.3e}")
    return worst

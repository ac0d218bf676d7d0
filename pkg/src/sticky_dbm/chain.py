"""Finite-volume discretization of the weighted form into a reversible jump chain.

Grid nodes carry the rho*mu mass of their cells (sticky nodes additionally the
atom/surface mass), grid edges carry midpoint conductances, and the jump rates
q(x -> y) = c(x, y) / pi(x) are reversible w.r.t. pi by construction.  The
discrete quadratic form sum c (f(x)-f(y))^2 approximates the continuum energy
and the discrete generator at sticky nodes approximates the derivative-jump
term of the explicit generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InternalConsistencyError
from .measure import (POINTS_1D, RECT_BOUNDARY_2D, Density, StickyStructure,
                      TruncationBox)

TAG_INTERIOR = 0
TAG_STICKY = 1
TAG_EDGE = 2  # on the reflecting truncation boundary

_ALIGN_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid spacing h on a truncation box; sticky set must align."""

    h: float
    box: TruncationBox

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigurationError("grid spacing must be positive")
        for L in self.box.half_widths:
            # L itself a multiple of h keeps every node an exact multiple of h
            if abs(round(L / self.h) * self.h - L) > _ALIGN_TOL:
                raise ConfigurationError(
                    f"box half-width {L} is not an integer multiple of h={self.h}",
                    code="E_ALIGN")

    def axis_count(self, axis: int) -> int:
        return int(round(2 * self.box.half_widths[axis] / self.h)) + 1

    def validate_sticky(self, sticky: StickyStructure | None):
        if sticky is None:
            return
        h = self.h
        if sticky.variant == POINTS_1D:
            if h >= sticky.min_gap / 2:
                raise ConfigurationError(
                    f"h={h} must be < half the minimal sticky gap {sticky.min_gap}",
                    code="E_CONFIG")
            coords = sticky.points
        else:
            coords = sticky.rect
        for c in coords:
            if abs(round(c / h) * h - c) > _ALIGN_TOL:
                raise ConfigurationError(
                    f"sticky coordinate {c} is not an integer multiple of h={h}",
                    code="E_ALIGN")
        # margin >= 2 cells between A and the reflecting boundary
        if sticky.variant == POINTS_1D:
            L = self.box.half_widths[0]
            for p in sticky.points:
                if p < -L + 2 * h - _ALIGN_TOL or p > L - 2 * h + _ALIGN_TOL:
                    raise ConfigurationError(
                        f"sticky point {p} too close to the truncation boundary",
                        code="E_CONFIG")
        else:
            a1, b1, a2, b2 = sticky.rect
            Lx, Ly = self.box.half_widths
            if (a1 < -Lx + 2 * h or b1 > Lx - 2 * h
                    or a2 < -Ly + 2 * h or b2 > Ly - 2 * h):
                raise ConfigurationError(
                    "sticky rectangle too close to the truncation boundary",
                    code="E_CONFIG")


@dataclass(frozen=True)
class JumpChain:
    """Reversible continuous-time jump chain on the truncated grid.

    CSR attributes (nbr_ptr/nbr_idx/nbr_prob_cum) drive event simulation;
    the undirected edge arrays (edge_u/edge_v/edge_c) drive the discrete
    energy form.
    """

    dim: int
    h: float
    shape: tuple[int, ...]
    coords: np.ndarray        # (n, dim) node coordinates
    tags: np.ndarray          # int8, TAG_*
    pi: np.ndarray            # float64 stationary weights
    region: np.ndarray        # int16 side index; -1 on the sticky set
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_c: np.ndarray
    nbr_ptr: np.ndarray       # int64 (n+1)
    nbr_idx: np.ndarray       # int32
    nbr_cond: np.ndarray      # float64 conductance per directed entry
    nbr_prob_cum: np.ndarray  # float64 cumulative jump probabilities per row
    total_rate: np.ndarray    # float64 exit rates
    density_name: str = "custom"

    def __post_init__(self):
        for arr in (self.coords, self.tags, self.pi, self.region, self.edge_u,
                    self.edge_v, self.edge_c, self.nbr_ptr, self.nbr_idx,
                    self.nbr_cond, self.nbr_prob_cum, self.total_rate):
            arr.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def sticky_mask(self) -> np.ndarray:
        return self.tags == TAG_STICKY

    def locate(self, x) -> int:
        """Index of the grid node nearest to coordinate x (must lie in the box)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape[0] != self.dim:
            raise ConfigurationError(f"start point {x} has wrong dimension")
        idx = 0
        for axis in range(self.dim):
            n_axis = self.shape[axis]
            L = (n_axis - 1) * self.h / 2
            i = int(round((x[axis] + L) / self.h))
            if not (0 <= i < n_axis):
                raise ConfigurationError(f"start point {x} outside the truncation box")
            idx = idx * n_axis + i
        return idx

    def rates_from(self, state: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.nbr_ptr[state], self.nbr_ptr[state + 1]
        return self.nbr_idx[lo:hi], self.nbr_cond[lo:hi] / self.pi[state]


def _density_at(density: Density, pts: np.ndarray) -> np.ndarray:
    return np.array([density(p) for p in pts])


def _axis_coords(grid: GridSpec, axis: int) -> np.ndarray:
    # exact integer multiples of h keep sticky alignment bit-exact
    n = grid.axis_count(axis)
    return (np.arange(n) - (n - 1) // 2) * grid.h


def build_chain(density: Density, sticky: StickyStructure | None,
                grid: GridSpec) -> JumpChain:
    """Assemble the jump chain; raises ConfigurationError on misalignment."""
    grid.validate_sticky(sticky)
    if density.dim != grid.box.dim:
        raise ConfigurationError("density/box dimension mismatch")
    if grid.box.dim == 1:
        chain = _build_1d(density, sticky, grid)
    elif grid.box.dim == 2:
        chain = _build_2d(density, sticky, grid)
    else:
        raise ConfigurationError("only d in {1, 2} is supported")
    _assert_invariants(chain)
    return chain


def _build_1d(density, sticky, grid):
    h = grid.h
    n = grid.axis_count(0)
    xs = _axis_coords(grid, 0)
    rho = _density_at(density, xs[:, None])

    cell = np.full(n, h)
    cell[0] = cell[-1] = h / 2
    pi = rho * cell

    tags = np.zeros(n, dtype=np.int8)
    tags[0] = tags[-1] = TAG_EDGE
    region = np.zeros(n, dtype=np.int16)
    if sticky is not None and sticky.variant == POINTS_1D:
        pts = np.asarray(sticky.points)
        for p, w in zip(sticky.points, sticky.weights):
            i = int(round((p - xs[0]) / h))
            pi[i] += rho[i] * w
            tags[i] = TAG_STICKY
        region[:] = np.searchsorted(pts, xs, side="right")
        region[tags == TAG_STICKY] = -1
    elif sticky is not None:
        raise ConfigurationError("1d grid needs Points1D stickiness")

    mid = 0.5 * (xs[:-1] + xs[1:])
    edge_c = _density_at(density, mid[:, None]) / h  # rho_mid * h^(d-2)
    edge_u = np.arange(n - 1, dtype=np.int64)
    edge_v = edge_u + 1
    return _finish(1, h, (n,), xs[:, None], tags, pi, region,
                   edge_u, edge_v, edge_c, density.name)


def _build_2d(density, sticky, grid):
    h = grid.h
    nx, ny = grid.axis_count(0), grid.axis_count(1)
    xs, ys = _axis_coords(grid, 0), _axis_coords(grid, 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    coords = np.column_stack([gx.ravel(), gy.ravel()])
    n = nx * ny
    rho = _density_at(density, coords)

    cell = np.full(n, h * h)
    ii, jj = np.divmod(np.arange(n), ny)
    for axis_idx, n_axis in ((ii, nx), (jj, ny)):
        edge_sel = (axis_idx == 0) | (axis_idx == n_axis - 1)
        cell[edge_sel] *= 0.5
    pi = rho * cell

    tags = np.zeros(n, dtype=np.int8)
    tags[(ii == 0) | (ii == nx - 1) | (jj == 0) | (jj == ny - 1)] = TAG_EDGE
    region = np.zeros(n, dtype=np.int16)

    if sticky is not None:
        if sticky.variant != RECT_BOUNDARY_2D:
            raise ConfigurationError("2d grid needs RectBoundary2D stickiness")
        a1, b1, a2, b2 = sticky.rect
        ia1 = int(round((a1 - xs[0]) / h))
        ib1 = int(round((b1 - xs[0]) / h))
        ja2 = int(round((a2 - ys[0]) / h))
        jb2 = int(round((b2 - ys[0]) / h))
        on_x = ((ii == ia1) | (ii == ib1)) & (jj >= ja2) & (jj <= jb2)
        on_y = ((jj == ja2) | (jj == jb2)) & (ii >= ia1) & (ii <= ib1)
        on_boundary = on_x | on_y
        # every boundary node owns h of arc length (corners: h/2 per edge)
        pi[on_boundary] += rho[on_boundary] * sticky.w_surf * h
        tags[on_boundary] = TAG_STICKY
        inside = (ii > ia1) & (ii < ib1) & (jj > ja2) & (jj < jb2)
        region[inside] = 1
        region[on_boundary] = -1

    # x-direction edges: (i, j) -- (i+1, j)
    sel_x = ii < nx - 1
    u_x = (np.arange(n)[sel_x]).astype(np.int64)
    v_x = u_x + ny
    mid_x = 0.5 * (coords[u_x] + coords[v_x])
    # y-direction edges: (i, j) -- (i, j+1)
    sel_y = jj < ny - 1
    u_y = (np.arange(n)[sel_y]).astype(np.int64)
    v_y = u_y + 1
    mid_y = 0.5 * (coords[u_y] + coords[v_y])

    edge_u = np.concatenate([u_x, u_y])
    edge_v = np.concatenate([v_x, v_y])
    edge_c = np.concatenate([_density_at(density, mid_x), _density_at(density, mid_y)])
    # rho_mid * h^(d-2) with d = 2: conductance is the midpoint density itself
    return _finish(2, h, (nx, ny), coords, tags, pi, region,
                   edge_u, edge_v, edge_c, density.name)


def _finish(dim, h, shape, coords, tags, pi, region,
            edge_u, edge_v, edge_c, density_name):
    n = pi.shape[0]
    src = np.concatenate([edge_u, edge_v])
    dst = np.concatenate([edge_v, edge_u])
    con = np.concatenate([edge_c, edge_c])
    order = np.argsort(src, kind="stable")
    src, dst, con = src[order], dst[order], con[order]

    counts = np.bincount(src, minlength=n)
    nbr_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=nbr_ptr[1:])

    total_c = np.bincount(src, weights=con, minlength=n)
    total_rate = np.where(pi > 0, total_c / pi, 0.0)

    # within-row cumulative jump probabilities c_j / sum_j c_j
    with np.errstate(invalid="ignore", divide="ignore"):
        prob = con / total_c[src]
    cs = np.cumsum(prob)
    row_offsets = np.concatenate([[0.0], cs[nbr_ptr[1:-1] - 1]]) if n > 1 else np.zeros(1)
    prob_cum = cs - np.repeat(row_offsets, counts)

    return JumpChain(
        dim=dim, h=h, shape=shape,
        coords=np.ascontiguousarray(coords, dtype=np.float64),
        tags=tags, pi=pi, region=region,
        edge_u=edge_u.astype(np.int64), edge_v=edge_v.astype(np.int64),
        edge_c=edge_c.astype(np.float64),
        nbr_ptr=nbr_ptr, nbr_idx=dst.astype(np.int32),
        nbr_cond=con.astype(np.float64),
        nbr_prob_cum=prob_cum.astype(np.float64),
        total_rate=total_rate.astype(np.float64),
        density_name=density_name,
    )


def _assert_invariants(chain: JumpChain):
    if np.any(~np.isfinite(chain.total_rate)) or np.any(chain.total_rate < 0):
        raise InternalConsistencyError("non-finite or negative exit rate")
    # reversibility: pi(u) q(u -> v) == c(u, v) == pi(v) q(v -> u)
    q_uv = chain.edge_c / chain.pi[chain.edge_u]
    q_vu = chain.edge_c / chain.pi[chain.edge_v]
    lhs = chain.pi[chain.edge_u] * q_uv
    rhs = chain.pi[chain.edge_v] * q_vu
    rel = np.max(np.abs(lhs - rhs) / chain.edge_c) if chain.edge_c.size else 0.0
    if rel > 1e-13:
        raise InternalConsistencyError(f"detailed balance violated: {rel:.2e}")
    # generator rows sum to zero
    if chain.n_states > 1:
        q_entries = chain.nbr_cond / chain.pi[_row_index(chain)]
        row_sums = np.add.reduceat(q_entries, chain.nbr_ptr[:-1])
        resid = np.max(np.abs(row_sums - chain.total_rate)
                       / np.maximum(chain.total_rate, 1e-300))
        if resid > 1e-12:
            raise InternalConsistencyError(f"generator row sums off by {resid:.2e}")


def _row_index(chain: JumpChain) -> np.ndarray:
    return np.repeat(np.arange(chain.n_states), np.diff(chain.nbr_ptr))


def discrete_generator_apply(chain: JumpChain, f) -> np.ndarray:
    """(Q f)(x) = sum_y q(x -> y) (f(y) - f(x)) for f given on states."""
    fv = _state_values(chain, f)
    if chain.n_states == 1:
        return np.zeros(1)
    flow = np.add.reduceat(chain.nbr_cond * fv[chain.nbr_idx], chain.nbr_ptr[:-1])
    total_c = np.add.reduceat(chain.nbr_cond, chain.nbr_ptr[:-1])
    return (flow - fv * total_c) / chain.pi


def discrete_energy(chain: JumpChain, f, g) -> float:
    """E_h(f, g) = sum over undirected edges of c (f(u)-f(v)) (g(u)-g(v))."""
    fv = _state_values(chain, f)
    gv = _state_values(chain, g)
    df = fv[chain.edge_u] - fv[chain.edge_v]
    dg = gv[chain.edge_u] - gv[chain.edge_v]
    return float(np.sum(chain.edge_c * df * dg))


def _state_values(chain: JumpChain, f) -> np.ndarray:
    if callable(f):
        return np.array([float(f(p)) for p in chain.coords])
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.n_states,):
        raise ConfigurationError("state function has wrong shape")
    return f


def chain_summary(chain: JumpChain) -> dict:
    """Scalar facts for the chain-info report."""
    tags = chain.tags
    return {
        "n_states": chain.n_states,
        "n_interior": int(np.sum(tags == TAG_INTERIOR)),
        "n_sticky": int(np.sum(tags == TAG_STICKY)),
        "n_reflecting_edge": int(np.sum(tags == TAG_EDGE)),
        "pi_total": float(np.sum(chain.pi)),
        "pi_sticky": float(np.sum(chain.pi[tags == TAG_STICKY])),
        "pi_interior_max": float(np.max(chain.pi[tags != TAG_STICKY]))
        if np.any(tags != TAG_STICKY) else 0.0,
        "rate_max": float(np.max(chain.total_rate)),
        "rate_min": float(np.min(chain.total_rate)),
        "h": chain.h,
    }

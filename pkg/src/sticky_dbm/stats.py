"""Path statistics: occupation fractions, ergodic averages, crossings,
increment moments, and the martingale residual of the decomposition
f(X_t) - f(X_0) = M_t + int L f(X_s) ds.

Confidence intervals treat per-path means as i.i.d. normal (95%, 1.96 sigma);
path-internal autocorrelation is absorbed by aggregating at path level only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .chain import JumpChain
from .dirichlet import apply_generator
from .errors import ContractViolation, NumericalFailure
from .measure import (Density, StickyStructure, TruncationBox, rho_mu_mass,
                      surface_quadrature)
from .quadrature import integrate_1d, integrate_2d
from .simulate import PathSample
from .testfunctions import TestFunction

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with a 95% normal-approximation half-width."""

    value: float
    ci_halfwidth: float
    n_paths: int

    def covers(self, target: float) -> bool:
        return abs(self.value - target) <= self.ci_halfwidth


def mean_ci(values) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ContractViolation("no values to aggregate")
    mean = float(np.mean(values))
    if n == 1:
        return Estimate(mean, math.nan, 1)
    half = Z95 * float(np.std(values, ddof=1)) / math.sqrt(n)
    return Estimate(mean, half, n)


def _window(path: PathSample, T_burnin):
    t0 = path.burnin if T_burnin is None else float(T_burnin)
    if not (0 <= t0 < path.T):
        raise ContractViolation(f"empty averaging window [{t0}, {path.T}]")
    return t0


def path_time_average(path: PathSample, state_values=None, coord_fn=None,
                      T_burnin=None) -> float:
    """Time average of an observable along one path over [burnin, T].

    Chain paths evaluate ``state_values`` (one float per chain state), using
    the exact occupancy vector when its window matches, the event record
    otherwise, or snapshot records as a sampled fallback.  Time-change paths
    evaluate ``coord_fn`` on recorded positions.
    """
    t0 = _window(path, T_burnin)
    if path.sampler == "timechange":
        if coord_fn is None:
            raise ContractViolation("time-change paths need a coordinate observable")
        vals = np.asarray([coord_fn(v) for v in np.atleast_1d(path.rec_values)])
        times = np.arange(vals.shape[0]) * path.rec_dt
        sel = times >= t0
        return float(np.mean(vals[sel]))

    if state_values is None:
        raise ContractViolation("chain paths need per-state observable values")
    state_values = np.asarray(state_values, dtype=float)
    if path.occupancy is not None and abs(path.burnin - t0) <= 1e-12 * max(1.0, path.T):
        window = path.T - t0
        return float(np.dot(path.occupancy, state_values)) / window
    if path.event_times is not None:
        times = path.event_times
        ends = np.append(times[1:], path.T)
        lo = np.maximum(times, t0)
        hi = np.minimum(ends, path.T)
        dur = np.maximum(hi - lo, 0.0)
        return float(np.dot(dur, state_values[path.event_states])) / (path.T - t0)
    if path.rec_states is not None:
        times = np.arange(path.rec_states.shape[0]) * path.rec_dt
        sel = times >= t0
        return float(np.mean(state_values[path.rec_states[sel]]))
    raise ContractViolation("path carries no usable records")


def ergodic_average(paths, chain: JumpChain, observable, T_burnin=None
                    ) -> tuple[Estimate, float]:
    """Per-path time averages of an observable, plus the chain's own target
    sum f pi / sum pi (the simulated value must match THIS within CI; the
    chain value is compared to the continuum quadrature separately)."""
    values = _observable_values(chain, observable)
    if not np.all(np.isfinite(values)):
        raise NumericalFailure("observable is non-finite on some chain state")
    per_path = [path_time_average(p, state_values=values, T_burnin=T_burnin)
                for p in paths]
    target = float(np.dot(values, chain.pi) / np.sum(chain.pi))
    return mean_ci(per_path), target


def sejour_fraction(paths, chain: JumpChain, T_burnin=None) -> tuple[Estimate, float]:
    """Fraction of time spent on the sticky states; identical code path to
    ergodic_average with the sticky indicator, so the two agree bit-exactly."""
    indicator = chain.sticky_mask.astype(float)
    return ergodic_average(paths, chain, indicator, T_burnin=T_burnin)


def _observable_values(chain: JumpChain, observable) -> np.ndarray:
    if callable(observable):
        return np.array([float(observable(p)) for p in chain.coords])
    arr = np.asarray(observable, dtype=float)
    if arr.shape != (chain.n_states,):
        raise ContractViolation("observable vector has wrong length")
    return arr


def continuum_average(density: Density, sticky: StickyStructure | None,
                      box: TruncationBox, observable) -> float:
    """Quadrature target int f rho dmu / rho mu(box) over the truncation box."""
    total = rho_mu_mass(density, sticky, box)
    iv = box.intervals
    if density.dim == 1:
        splits = sticky.points if sticky is not None else ()
        part = integrate_1d(lambda x: float(observable(np.array([x]))) * density([x]),
                            iv[0][0], iv[0][1], splits)
        if sticky is not None:
            part += sum(w * density([p]) * float(observable(np.array([p])))
                        for p, w in zip(sticky.points, sticky.weights))
    else:
        bx, by = (), ()
        if sticky is not None:
            a1, b1, a2, b2 = sticky.rect
            bx, by = (a1, b1), (a2, b2)
        part = integrate_2d(
            lambda x, y: float(observable(np.array([x, y]))) * density([x, y]),
            iv, bx, by, abs_tol=1e-10, rel_tol=1e-9)
        if sticky is not None:
            part += surface_quadrature(density, sticky,
                                       lambda p: float(observable(p)))
    return part / total


def crossing_counts(paths, chain: JumpChain | None = None) -> np.ndarray:
    """Per-path crossing counts of the sticky set (side flips, boundary visits
    between two same-side excursions do not count)."""
    counts = []
    for p in paths:
        if p.crossings is not None:
            counts.append(p.crossings)
        elif p.event_states is not None and chain is not None:
            regions = chain.region[p.event_states]
            off = regions[regions >= 0]
            counts.append(int(np.count_nonzero(off[1:] != off[:-1])))
        else:
            raise ContractViolation("path carries no crossing information")
    return np.asarray(counts, dtype=np.int64)


def small_ball_fraction(path: PathSample, radius: float, center: float = 0.0,
                        chain: JumpChain | None = None, T_burnin=None) -> float:
    """Time fraction spent within |x - center| <= radius."""
    if path.sampler == "timechange":
        return path_time_average(
            path, coord_fn=lambda v: 1.0 if abs(v - center) <= radius else 0.0,
            T_burnin=T_burnin)
    if chain is None:
        raise ContractViolation("chain paths need the chain for geometry")
    dist = np.abs(chain.coords[:, 0] - center) if chain.dim == 1 else \
        np.linalg.norm(chain.coords - center, axis=1)
    indicator = (dist <= radius * (1 + 1e-12)).astype(float)
    return path_time_average(path, state_values=indicator, T_burnin=T_burnin)


@dataclass
class ProbeCellMoments:
    """Drift/diffusion estimates from increments X_{t+delta} - X_t in one cell."""

    center: np.ndarray
    n_samples: int
    drift: np.ndarray
    drift_se: np.ndarray
    diffusion: np.ndarray
    insufficient: bool


def increment_moments(paths, chain: JumpChain, centers, delta: float,
                      min_samples: int = 200, T_burnin=None) -> list[ProbeCellMoments]:
    """Conditional increment moments at probe cells from snapshot records.

    Drift estimate E[X_{t+d} - X_t | X_t in cell]/d targets grad ln rho at the
    cell center; the per-coordinate variance over d targets 2.
    """
    centers = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    h = chain.h
    for c in centers:
        near_sticky = np.min(np.abs(chain.coords[chain.sticky_mask] - c).sum(axis=1)) \
            if np.any(chain.sticky_mask) else math.inf
        if near_sticky < 3 * h:
            raise ContractViolation(f"probe cell {c} within 3h of the sticky set")
        for axis in range(chain.dim):
            L = (chain.shape[axis] - 1) * h / 2
            if abs(c[axis]) > L - 3 * h:
                raise ContractViolation(f"probe cell {c} within 3h of the boundary")

    out = []
    increments = {i: [] for i in range(len(centers))}
    for p in paths:
        if p.rec_states is None:
            raise ContractViolation("increment_moments needs snapshot-recorded paths")
        lag = int(round(delta / p.rec_dt))
        if abs(lag * p.rec_dt - delta) > 1e-9 * delta or lag < 1:
            raise ContractViolation("delta must be a positive multiple of rec_dt")
        t0 = _window(p, T_burnin)
        j0 = int(math.ceil(t0 / p.rec_dt))
        x = chain.coords[p.rec_states]
        base = x[j0:-lag] if lag < x.shape[0] - j0 else x[:0]
        ahead = x[j0 + lag:]
        for ci, c in enumerate(centers):
            mask = np.all(np.abs(base - c) <= h / 2 * (1 + 1e-12), axis=1)
            if np.any(mask):
                increments[ci].append(ahead[mask] - base[mask])

    for ci, c in enumerate(centers):
        if increments[ci]:
            d = np.concatenate(increments[ci], axis=0)
            n = d.shape[0]
        else:
            d = np.zeros((0, chain.dim))
            n = 0
        if n >= 2:
            drift = d.mean(axis=0) / delta
            drift_se = d.std(axis=0, ddof=1) / math.sqrt(n) / delta
            diffusion = d.var(axis=0, ddof=1) / delta
        else:
            drift = np.full(chain.dim, math.nan)
            drift_se = np.full(chain.dim, math.nan)
            diffusion = np.full(chain.dim, math.nan)
        out.append(ProbeCellMoments(
            center=c, n_samples=n, drift=drift, drift_se=drift_se,
            diffusion=diffusion, insufficient=n < min_samples))
    return out


@dataclass
class FukushimaReport:
    """Martingale residual M_T = f(X_T) - f(X_0) - int_0^T L f(X_s) ds."""

    function: str
    n_paths: int
    mean_MT: float
    ci_halfwidth: float
    var_MT: float
    mean_bracket: float
    ratio: float                # Var(M_T) / E[<M>_T], targets 1

    @property
    def mean_within_3ci(self) -> bool:
        return abs(self.mean_MT) <= 3.0 * self.ci_halfwidth


def generator_state_values(chain: JumpChain, fn: TestFunction, density: Density,
                           sticky: StickyStructure) -> np.ndarray:
    """L f evaluated on chain states: bulk values off A, jump values on A."""
    gen = apply_generator(fn, density, sticky)
    vals = np.empty(chain.n_states)
    sticky_mask = chain.sticky_mask
    for i, p in enumerate(chain.coords):
        vals[i] = gen.on_A(p) if sticky_mask[i] else gen.off_A(p)
    return vals


def fukushima_residual(paths, chain: JumpChain, fn: TestFunction,
                       density: Density, sticky: StickyStructure) -> FukushimaReport:
    """Monte Carlo check of the decomposition: mean(M_T) targets 0 and
    Var(M_T) / E[int 2 |grad f|^2(X_s) rho-free ds] targets 1.

    Needs full-horizon occupancies (burnin = 0) or event records.
    """
    for axis in range(chain.dim):
        L = (chain.shape[axis] - 1) * chain.h / 2
        lo = fn.support_center[axis] - fn.support_radius
        hi = fn.support_center[axis] + fn.support_radius
        if lo < -L - 1e-12 or hi > L + 1e-12:
            raise ContractViolation(
                f"{fn.name}: support [{lo}, {hi}] exceeds the truncation box")

    lf = generator_state_values(chain, fn, density, sticky)
    # bracket integrand: 2 |grad f|^2 off A.  This is the time integrand of the
    # square bracket; the rho-weighted energy-measure density is its Revuz
    # measure w.r.t. rho*mu, so the density factor cancels along the path.
    bracket_vals = np.array([
        0.0 if chain.sticky_mask[i] else 2.0 * float(np.dot(fn.grad(p), fn.grad(p)))
        for i, p in enumerate(chain.coords)])
    f_vals = np.array([fn(p) for p in chain.coords])

    mts, brackets = [], []
    for p in paths:
        occ = _full_occupancy(p, chain)
        mt = f_vals[p.final_state] - f_vals[p.start_state] - float(np.dot(occ, lf))
        mts.append(mt)
        brackets.append(float(np.dot(occ, bracket_vals)))
    est = mean_ci(mts)
    var_mt = float(np.var(mts, ddof=1)) if len(mts) > 1 else math.nan
    mean_bracket = float(np.mean(brackets))
    return FukushimaReport(
        function=fn.name, n_paths=est.n_paths, mean_MT=est.value,
        ci_halfwidth=est.ci_halfwidth, var_MT=var_mt,
        mean_bracket=mean_bracket,
        ratio=var_mt / mean_bracket if mean_bracket > 0 else math.nan)


def _full_occupancy(path: PathSample, chain: JumpChain) -> np.ndarray:
    if path.occupancy is not None and path.burnin == 0.0:
        return path.occupancy
    if path.event_times is not None:
        occ = np.zeros(chain.n_states)
        times = path.event_times
        ends = np.append(times[1:], path.T)
        np.add.at(occ, path.event_states, ends - times)
        return occ
    raise ContractViolation(
        "fukushima_residual needs burnin=0 occupancies or event records")


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance."""
    return float(sps.ks_2samp(np.asarray(a), np.asarray(b)).statistic)


def holding_time_ks(paths, chain: JumpChain, state: int) -> tuple[float, float, int]:
    """KS test of observed holding times at a state against Exp(total rate)."""
    from .simulate import holding_times

    holds = np.concatenate([holding_times(p, state) for p in paths])
    rate = chain.total_rate[state]
    res = sps.kstest(holds, "expon", args=(0.0, 1.0 / rate))
    return float(res.statistic), float(res.pvalue), holds.size


@dataclass
class OccupancyReport:
    """Sejour fraction, ergodic averages, and crossing statistics for one run.

    Each ergodic entry carries the two-level comparison: the simulated value
    with its CI, the chain's own invariant target, and (when computable) the
    continuum quadrature value.
    """

    n_paths: int
    T: float
    h: float
    burnin: float
    sejour: Estimate | None = None
    sejour_chain: float | None = None
    sejour_continuum: float | None = None
    crossing_min: int | None = None
    crossing_mean: float | None = None
    ergodic: dict[str, tuple[Estimate, float, float | None]] = field(default_factory=dict)


@dataclass
class MomentReport:
    """Increment-moment cells plus martingale-residual summaries."""

    cells: list[ProbeCellMoments] = field(default_factory=list)
    fukushima: list[FukushimaReport] = field(default_factory=list)
    min_samples: int = 200


def build_occupancy_report(paths, chain: JumpChain, density: Density,
                           sticky: StickyStructure | None, box: TruncationBox,
                           observables=(), with_sejour=True,
                           with_crossings=True, T_burnin=None) -> OccupancyReport:
    """Assemble the occupation-side report with its two-level targets."""
    first = paths[0]
    report = OccupancyReport(n_paths=len(paths), T=first.T, h=chain.h,
                             burnin=first.burnin if T_burnin is None else T_burnin)
    if with_sejour and sticky is not None:
        est, chain_target = sejour_fraction(paths, chain, T_burnin)
        from .measure import nearest_sticky_distance

        cont = continuum_average(
            density, sticky, box,
            lambda p: 1.0 if nearest_sticky_distance(sticky, p) <= 1e-12 else 0.0)
        report.sejour = est
        report.sejour_chain = chain_target
        report.sejour_continuum = cont
    for name, fn in observables:
        est, chain_target = ergodic_average(paths, chain, fn, T_burnin)
        cont = continuum_average(density, sticky, box, fn)
        report.ergodic[name] = (est, chain_target, cont)
    if with_crossings:
        counts = crossing_counts(paths, chain)
        report.crossing_min = int(counts.min())
        report.crossing_mean = float(counts.mean())
    return report


def build_moment_report(paths, chain: JumpChain, density: Density,
                        sticky: StickyStructure | None, cells=(), delta=0.0,
                        test_functions=(), min_samples: int = 200) -> MomentReport:
    """Assemble increment-moment cells and martingale residuals."""
    report = MomentReport(min_samples=min_samples)
    if cells and delta > 0:
        report.cells = increment_moments(paths, chain, cells, delta,
                                         min_samples=min_samples)
    for fn in test_functions:
        report.fukushima.append(
            fukushima_residual(paths, chain, fn, density, sticky))
    return report

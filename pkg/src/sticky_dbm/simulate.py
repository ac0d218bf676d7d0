"""Path samplers: exact event-driven chain simulation and a 1d time-change oracle.

Chain paths use competing exponentials (holding time ~ Exp(total rate), then a
neighbor proportional to its rate).  Randomness is consumed from per-path
buffers drawn ahead of the hot loop, so the numba-compiled kernel and the pure
Python fallback produce bit-identical paths.

Per-path seeds come from a splittable SplitMix64 counter scheme:
    seed_i = splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
so any subset of path indices can be simulated independently, in any order or
thread count, with identical results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import JumpChain
from .errors import ConfigurationError, InternalConsistencyError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# randomness is consumed in fixed-size chunks; the 0-1 draws left at a chunk
# boundary are discarded, which is deterministic for a fixed chunk size
_CHUNK = 1 << 20
_EVENT_BUF = 1 << 20

_STATUS_DONE = 0
_STATUS_NEED_RANDOM = 1
_STATUS_EVENTS_FULL = 2


def mix_seed(seed: int, index: int) -> int:
    """SplitMix64 of (seed + (index+1) * golden gamma); the documented per-path seed."""
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix_seed(seed, index)))


def _kernel_py(state, t, i_u, next_rec, ev_count, last_region, crossings,
               u, T, burnin,
               nbr_ptr, nbr_idx, prob_cum, total_rate, region,
               occ,
               rec_dt, n_rec, rec_states,
               record_events, ev_times, ev_states):
    while True:
        if record_events == 1 and ev_count >= ev_times.shape[0]:
            return (_STATUS_EVENTS_FULL, state, t, i_u, next_rec, ev_count,
                    last_region, crossings)
        if i_u + 2 > u.shape[0]:
            return (_STATUS_NEED_RANDOM, state, t, i_u, next_rec, ev_count,
                    last_region, crossings)

        rate = total_rate[state]
        u1 = u[i_u]
        i_u += 1
        hold = -math.log(1.0 - u1) / rate
        if hold == 0.0:
            hold = 1e-300
        t_end = t + hold

        if t_end >= T:
            while rec_dt > 0.0 and next_rec < n_rec:
                rec_states[next_rec] = state
                next_rec += 1
            a = t if t > burnin else burnin
            if T > a:
                occ[state] += T - a
            return (_STATUS_DONE, state, T, i_u, next_rec, ev_count,
                    last_region, crossings)

        while rec_dt > 0.0 and next_rec < n_rec:
            if next_rec * rec_dt >= t_end:
                break
            rec_states[next_rec] = state
            next_rec += 1
        a = t if t > burnin else burnin
        if t_end > a:
            occ[state] += t_end - a
        t = t_end

        u2 = u[i_u]
        i_u += 1
        lo = nbr_ptr[state]
        hi = nbr_ptr[state + 1]
        j = lo
        while j < hi - 1 and u2 >= prob_cum[j]:
            j += 1
        state = nbr_idx[j]

        if record_events == 1:
            ev_times[ev_count] = t
            ev_states[ev_count] = state
            ev_count += 1

        rg = region[state]
        if rg >= 0:
            if last_region >= 0 and rg != last_region:
                crossings += 1
            last_region = rg


try:  # pragma: no cover - exercised implicitly everywhere
    import numba

    _kernel = numba.njit(cache=True, nogil=True)(_kernel_py)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _kernel = _kernel_py
    HAVE_NUMBA = False


@dataclass(frozen=True)
class SimConfig:
    """Simulation request: horizon, path count, seeding, recording mode."""

    seed: int
    T: float
    n_paths: int
    start: tuple[float, ...] | float = 0.0
    burnin: float | None = None         # defaults to T/10
    recording: str = "events"           # events | snapshots | none
    rec_dt: float = 0.0

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigurationError("horizon T must be positive")
        if self.n_paths < 1:
            raise ConfigurationError("n_paths must be >= 1")
        if self.recording not in ("events", "snapshots", "none"):
            raise ConfigurationError(f"unknown recording mode {self.recording!r}")
        if self.recording == "snapshots" and self.rec_dt <= 0:
            raise ConfigurationError("snapshot recording needs rec_dt > 0")
        if self.burnin is not None and not (0 <= self.burnin < self.T):
            raise ConfigurationError("burnin must lie in [0, T)")

    @property
    def burnin_resolved(self) -> float:
        return self.T / 10 if self.burnin is None else self.burnin

    def start_point(self, dim: int) -> np.ndarray:
        if isinstance(self.start, (int, float)):
            return np.full(dim, float(self.start))
        return np.asarray(self.start, dtype=float)


@dataclass
class PathSample:
    """One simulated path: event or snapshot records plus exact per-path payloads.

    Chain paths are piecewise constant (right-continuous) in their events;
    time-change paths are recorded on a uniform grid and interpreted as
    continuous.  ``occupancy`` holds the exact time spent in each chain state
    over [burnin, T], accumulated during simulation so that long runs never
    need to materialize their full event streams.
    """

    sampler: str
    seed: int
    index: int
    T: float
    burnin: float
    interpretation: str
    start_state: int | None = None
    final_state: int | None = None
    event_times: np.ndarray | None = None
    event_states: np.ndarray | None = None
    rec_dt: float | None = None
    rec_states: np.ndarray | None = None
    rec_values: np.ndarray | None = None
    occupancy: np.ndarray | None = None
    crossings: int | None = None
    final_value: float | None = None


def _simulate_one(chain: JumpChain, cfg: SimConfig, index: int) -> PathSample:
    start_idx = chain.locate(cfg.start_point(chain.dim))
    T = float(cfg.T)
    burnin = cfg.burnin_resolved
    rng = path_rng(cfg.seed, index)

    n = chain.n_states
    occ = np.zeros(n)
    record_events = 1 if cfg.recording == "events" else 0
    rec_dt = float(cfg.rec_dt) if cfg.recording == "snapshots" else 0.0
    n_rec = int(math.floor(T / rec_dt)) + 1 if rec_dt > 0 else 0
    rec_states = np.empty(max(n_rec, 1), dtype=np.int32)

    ev_chunks_t: list[np.ndarray] = []
    ev_chunks_s: list[np.ndarray] = []
    ev_times = np.empty(_EVENT_BUF if record_events else 1)
    ev_states = np.empty(_EVENT_BUF if record_events else 1, dtype=np.int32)

    state = start_idx
    t = 0.0
    next_rec = 0
    ev_count = 0
    last_region = int(chain.region[state])
    crossings = 0

    if chain.total_rate[start_idx] <= 0.0:
        nbrs = chain.nbr_ptr[start_idx + 1] - chain.nbr_ptr[start_idx]
        if nbrs > 0:
            raise InternalConsistencyError(
                f"state {start_idx} has neighbors but zero exit rate")
        occ[state] = T - burnin
        if rec_dt > 0:
            rec_states[:n_rec] = state
        return PathSample(
            sampler="chain", seed=cfg.seed, index=index, T=T, burnin=burnin,
            interpretation="jump", start_state=start_idx, final_state=state,
            event_times=np.zeros(1), event_states=np.full(1, state, dtype=np.int32),
            rec_dt=rec_dt if rec_dt > 0 else None,
            rec_states=rec_states[:n_rec] if rec_dt > 0 else None,
            occupancy=occ, crossings=0)

    u = np.empty(0)
    i_u = 0
    while True:
        if i_u + 2 > u.shape[0]:
            u = rng.random(_CHUNK)
            i_u = 0
        (status, state, t, i_u, next_rec, ev_count, last_region, crossings) = _kernel(
            state, t, i_u, next_rec, ev_count, last_region, crossings,
            u, T, burnin,
            chain.nbr_ptr, chain.nbr_idx, chain.nbr_prob_cum, chain.total_rate,
            chain.region, occ,
            rec_dt, n_rec, rec_states,
            record_events, ev_times, ev_states)
        if status == _STATUS_DONE:
            break
        if status == _STATUS_EVENTS_FULL:
            ev_chunks_t.append(ev_times[:ev_count].copy())
            ev_chunks_s.append(ev_states[:ev_count].copy())
            ev_count = 0

    sample = PathSample(
        sampler="chain", seed=cfg.seed, index=index, T=T, burnin=burnin,
        interpretation="jump", start_state=start_idx, final_state=int(state),
        occupancy=occ, crossings=int(crossings))
    if record_events:
        ev_chunks_t.append(ev_times[:ev_count].copy())
        ev_chunks_s.append(ev_states[:ev_count].copy())
        times = np.concatenate([np.zeros(1)] + ev_chunks_t)
        states = np.concatenate([np.full(1, start_idx, dtype=np.int32)] + ev_chunks_s)
        sample.event_times = times
        sample.event_states = states
    if rec_dt > 0:
        sample.rec_dt = rec_dt
        sample.rec_states = rec_states[:n_rec]
    return sample


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("STICKY_DBM_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"bad STICKY_DBM_THREADS value {env!r}")
    return 1


def batch_simulate(chain: JumpChain, cfg: SimConfig, indices=None,
                   threads: int | None = None) -> list[PathSample]:
    """Simulate paths for the given indices (default 0..n_paths-1).

    Results are returned in index order regardless of thread count; thread
    count affects speed only.
    """
    if indices is None:
        indices = range(cfg.n_paths)
    indices = list(indices)
    n_threads = resolve_threads(threads)
    if n_threads == 1 or len(indices) == 1:
        return [_simulate_one(chain, cfg, i) for i in indices]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(lambda i: _simulate_one(chain, cfg, i), indices))


def simulate_chain(chain: JumpChain, cfg: SimConfig,
                   threads: int | None = None) -> list[PathSample]:
    return batch_simulate(chain, cfg, threads=threads)


def holding_times(path: PathSample, state: int) -> np.ndarray:
    """Observed holding durations at a given state (event-recorded paths)."""
    if path.event_times is None:
        raise ConfigurationError("holding_times needs an event-recorded path")
    times = path.event_times
    states = path.event_states
    ends = np.append(times[1:], path.T)
    mask = states == state
    return (ends - times)[mask]


def driving_motion_and_clock(rng, n_steps: int, dt: float, eps: float,
                             w: float, start: float):
    """Driving motion B (quadratic variation 2t), its local-time estimate
    increments, and the strictly increasing clock gamma(t) = t + w * l_hat(t)."""
    incr = rng.normal(0.0, math.sqrt(2.0 * dt), n_steps)
    B = np.empty(n_steps + 1)
    B[0] = start
    np.cumsum(incr, out=B[1:])
    B[1:] += start

    near = np.abs(B[:-1]) <= eps
    dl = (dt / eps) * near                       # (1/(2 eps)) * 2 dt per step
    gamma = np.empty(n_steps + 1)
    gamma[0] = 0.0
    np.cumsum(dt + w * dl, out=gamma[1:])
    return B, gamma, dl


def simulate_timechange_sticky_bm(w: float, cfg: SimConfig, dt: float = 1e-4,
                                  eps: float | None = None) -> list[PathSample]:
    """Sticky Brownian motion at the origin via a local-time clock change.

    The driving motion B has quadratic variation 2t.  The symmetric local time
    at 0 is estimated by the occupation-window estimator
        l_hat(t) = (1 / (2 eps)) * sum 1{|B_s| <= eps} * (2 dt),
    the clock is gamma(t) = t + w * l_hat(t), and the returned path is
    X_t = B(gamma^{-1}(t)).  Record times that fall into the local-time part
    of a clock step are reported as exactly 0: the true time-changed process
    sits at the sticky point throughout such stretches.
    """
    if w < 0:
        raise ConfigurationError("stickiness w must be nonnegative")
    if dt > 1e-4 + 1e-18:
        raise ConfigurationError("time-change sampler requires dt <= 1e-4")
    if eps is None:
        eps = 5.0 * math.sqrt(dt)
    if not (0.0 < eps <= 10.0 * math.sqrt(dt)):
        raise ConfigurationError("eps must lie in (0, 10*sqrt(dt)]")
    if cfg.recording != "snapshots":
        raise ConfigurationError("time-change sampler records on a uniform grid; "
                                 "use recording='snapshots'")
    start = float(cfg.start_point(1)[0])

    T = float(cfg.T)
    n_steps = int(math.ceil(T / dt))
    rec_dt = float(cfg.rec_dt)
    n_rec = int(math.floor(T / rec_dt)) + 1
    rec_times = np.arange(n_rec) * rec_dt

    paths = []
    for index in range(cfg.n_paths):
        rng = path_rng(cfg.seed, index)
        B, gamma, dl = driving_motion_and_clock(rng, n_steps, dt, eps, w, start)

        k = np.searchsorted(gamma, rec_times, side="left")
        k = np.clip(k, 1, n_steps)
        offset = rec_times - gamma[k - 1]
        # a record falls in the motion part of its clock step unless the step
        # has a local-time rest part and the offset lies beyond dt
        moving = (offset <= dt) | (w * dl[k - 1] == 0.0)
        frac = np.clip(offset / dt, 0.0, 1.0)
        values = np.where(moving, B[k - 1] + frac * (B[k] - B[k - 1]), 0.0)
        values[0] = start

        signs = np.sign(values)
        nz = signs[signs != 0]
        crossings = int(np.count_nonzero(nz[1:] != nz[:-1]))

        paths.append(PathSample(
            sampler="timechange", seed=cfg.seed, index=index, T=T,
            burnin=cfg.burnin_resolved, interpretation="continuous",
            rec_dt=rec_dt, rec_values=values, crossings=crossings,
            final_value=float(values[-1])))
    return paths

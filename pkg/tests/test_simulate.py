import math

import numpy as np
import pytest
from scipy import stats as sps

from sticky_dbm.chain import GridSpec, build_chain
from sticky_dbm.errors import ConfigurationError
from sticky_dbm.measure import (constant_density, gaussian_density, points_1d,
                                truncation_box)
from sticky_dbm.simulate import (SimConfig, batch_simulate, holding_times,
                                 mix_seed, path_rng, simulate_chain,
                                 simulate_timechange_sticky_bm)
from sticky_dbm.stats import holding_time_ks, small_ball_fraction


@pytest.fixture(scope="module")
def ref_chain():
    return build_chain(constant_density(1), points_1d([0.0], 1.0),
                       GridSpec(0.1, truncation_box(5.0, 1)))


@pytest.fixture(scope="module")
def gauss_chain():
    return build_chain(gaussian_density(1), points_1d([0.0], 1.0),
                       GridSpec(0.1, truncation_box(6.0, 1)))


def test_mix_seed_spreads():
    seeds = {mix_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert mix_seed(42, 0) != mix_seed(43, 0)
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_paths_deterministic(ref_chain):
    cfg = SimConfig(seed=9, T=20.0, n_paths=2, start=0.0, recording="events")
    a = simulate_chain(ref_chain, cfg)
    b = simulate_chain(ref_chain, cfg)
    for x, y in zip(a, b):
        assert np.array_equal(x.event_times, y.event_times)
        assert np.array_equal(x.event_states, y.event_states)
        assert np.array_equal(x.occupancy, y.occupancy)
    assert not np.array_equal(a[0].event_times, a[1].event_times)


def test_batch_indices_and_order_independence(ref_chain):
    cfg = SimConfig(seed=9, T=20.0, n_paths=4, start=0.0, recording="events")
    full = simulate_chain(ref_chain, cfg)
    subset = batch_simulate(ref_chain, cfg, indices=[2, 0])
    assert np.array_equal(subset[0].event_times, full[2].event_times)
    assert np.array_equal(subset[1].event_times, full[0].event_times)
    threaded = batch_simulate(ref_chain, cfg, threads=4)
    for x, y in zip(full, threaded):
        assert np.array_equal(x.event_times, y.event_times)


def test_event_invariants(ref_chain):
    cfg = SimConfig(seed=2, T=50.0, n_paths=1, start=0.0, recording="events")
    p = simulate_chain(ref_chain, cfg)[0]
    assert p.event_times[0] == 0.0
    assert np.all(np.diff(p.event_times) > 0)
    assert p.event_times[-1] <= p.T
    # jumps move to grid neighbors only
    steps = np.abs(np.diff(ref_chain.coords[p.event_states, 0]))
    assert np.allclose(steps, 0.1)
    # conservation: occupancy accounts for the whole window
    assert p.occupancy.sum() == pytest.approx(p.T - p.burnin, abs=1e-9)


def test_snapshot_recording(ref_chain):
    cfg = SimConfig(seed=4, T=10.0, n_paths=1, start=0.0,
                    recording="snapshots", rec_dt=0.5)
    p = simulate_chain(ref_chain, cfg)[0]
    assert p.rec_states.shape == (21,)
    assert p.rec_states[0] == ref_chain.locate([0.0])
    assert p.final_state == p.rec_states[-1]


def test_snapshots_match_events(ref_chain):
    cfg_e = SimConfig(seed=6, T=10.0, n_paths=1, start=0.0, recording="events")
    cfg_s = SimConfig(seed=6, T=10.0, n_paths=1, start=0.0,
                      recording="snapshots", rec_dt=0.25)
    pe = simulate_chain(ref_chain, cfg_e)[0]
    ps = simulate_chain(ref_chain, cfg_s)[0]
    # same randomness, so the snapshot at t must equal the event-path state
    for j, t in enumerate(np.arange(41) * 0.25):
        k = np.searchsorted(pe.event_times, t, side="right") - 1
        assert ps.rec_states[j] == pe.event_states[k]


def test_mean_holding_time_at_sticky_node(ref_chain):
    cfg = SimConfig(seed=3, T=1e4, n_paths=1, start=0.0, recording="events")
    p = simulate_chain(ref_chain, cfg)[0]
    holds = holding_times(p, ref_chain.locate([0.0]))
    assert holds.size >= 1e4
    expected = 1.0 / (2 * 100.0 / 11.0)
    assert holds.mean() == pytest.approx(expected, rel=0.02)


def test_holding_time_law_ks(gauss_chain):
    cfg = SimConfig(seed=8, T=500.0, n_paths=4, start=0.0, recording="events")
    paths = simulate_chain(gauss_chain, cfg)
    stat, pvalue, n = holding_time_ks(paths, gauss_chain, gauss_chain.locate([0.0]))
    assert n >= 1e3
    assert pvalue > 0.01


def test_empirical_distribution_approaches_pi(gauss_chain):
    cfg = SimConfig(seed=12, T=2e4, n_paths=4, start=0.0, recording="none")
    paths = simulate_chain(gauss_chain, cfg)
    occ = np.sum([p.occupancy for p in paths], axis=0)
    emp = occ / occ.sum()
    target = gauss_chain.pi / gauss_chain.pi.sum()
    tv = 0.5 * np.abs(emp - target).sum()
    assert tv < 0.02


def test_single_state_chain_stays_put():
    from sticky_dbm.chain import JumpChain, TAG_STICKY

    chain = JumpChain(
        dim=1, h=1.0, shape=(1,), coords=np.zeros((1, 1)),
        tags=np.array([TAG_STICKY], dtype=np.int8), pi=np.ones(1),
        region=np.array([-1], dtype=np.int16),
        edge_u=np.zeros(0, dtype=np.int64), edge_v=np.zeros(0, dtype=np.int64),
        edge_c=np.zeros(0),
        nbr_ptr=np.zeros(2, dtype=np.int64), nbr_idx=np.zeros(0, dtype=np.int32),
        nbr_cond=np.zeros(0), nbr_prob_cum=np.zeros(0),
        total_rate=np.zeros(1))
    cfg = SimConfig(seed=1, T=5.0, n_paths=1, start=0.0,
                    recording="snapshots", rec_dt=1.0)
    p = simulate_chain(chain, cfg)[0]
    assert p.event_times.shape == (1,) and p.event_times[0] == 0.0
    assert np.all(p.rec_states == 0)
    assert p.occupancy.sum() == pytest.approx(p.T - p.burnin, abs=1e-12)
    assert p.crossings == 0


def test_start_outside_box_rejected(ref_chain):
    cfg = SimConfig(seed=1, T=1.0, n_paths=1, start=9.0)
    with pytest.raises(ConfigurationError):
        simulate_chain(ref_chain, cfg)


def test_sim_config_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(seed=1, T=-1.0, n_paths=1)
    with pytest.raises(ConfigurationError):
        SimConfig(seed=1, T=1.0, n_paths=0)
    with pytest.raises(ConfigurationError):
        SimConfig(seed=1, T=1.0, n_paths=1, recording="snapshots")
    with pytest.raises(ConfigurationError):
        SimConfig(seed=1, T=1.0, n_paths=1, burnin=1.5)
    cfg = SimConfig(seed=1, T=10.0, n_paths=1)
    assert cfg.burnin_resolved == pytest.approx(1.0)


# --- time-change sampler ----------------------------------------------------

def _tc_cfg(n_paths=8, T=1.0, rec_dt=1e-3, seed=21):
    return SimConfig(seed=seed, T=T, n_paths=n_paths, start=0.0, burnin=0.0,
                     recording="snapshots", rec_dt=rec_dt)


def test_timechange_zero_weight_is_driving_motion():
    cfg = _tc_cfg(n_paths=2)
    paths_w0 = simulate_timechange_sticky_bm(0.0, cfg, dt=1e-4)
    for p in paths_w0:
        # variance-2t driving motion recovered at the recording grid
        rng = path_rng(cfg.seed, p.index)
        incr = rng.normal(0.0, math.sqrt(2.0 * 1e-4), 10000)
        B = np.concatenate([[0.0], np.cumsum(incr)])
        times = np.arange(p.rec_values.shape[0]) * p.rec_dt
        idx = np.round(times / 1e-4).astype(int)
        assert np.allclose(p.rec_values, B[idx], atol=1e-7)


def test_timechange_stickiness_increases_small_ball():
    cfg = _tc_cfg(n_paths=200)
    sticky = simulate_timechange_sticky_bm(1.0, cfg, dt=1e-4)
    free = simulate_timechange_sticky_bm(0.0, cfg, dt=1e-4)
    eps = 5.0 * math.sqrt(1e-4)
    diffs = []
    for ps, pf in zip(sticky, free):
        fs = np.mean(np.abs(ps.rec_values) <= eps)
        ff = np.mean(np.abs(pf.rec_values) <= eps)
        diffs.append(fs - ff)
    diffs = np.asarray(diffs)
    # paired one-sided test at 99%
    t = diffs.mean() / (diffs.std(ddof=1) / math.sqrt(diffs.size))
    assert t > 2.33


def test_timechange_symmetric_law():
    cfg = _tc_cfg(n_paths=1000, seed=22)
    paths = simulate_timechange_sticky_bm(1.0, cfg, dt=1e-4)
    x1 = np.array([p.final_value for p in paths])
    stat = sps.ks_2samp(x1, -x1).statistic
    assert stat < 0.03


def test_timechange_parameter_validation():
    cfg = _tc_cfg()
    with pytest.raises(ConfigurationError):
        simulate_timechange_sticky_bm(1.0, cfg, dt=1e-3)          # dt too big
    with pytest.raises(ConfigurationError):
        simulate_timechange_sticky_bm(1.0, cfg, dt=1e-4, eps=0.2)  # eps too big
    with pytest.raises(ConfigurationError):
        simulate_timechange_sticky_bm(-1.0, cfg, dt=1e-4)
    bad = SimConfig(seed=1, T=1.0, n_paths=1, start=0.0, recording="events")
    with pytest.raises(ConfigurationError):
        simulate_timechange_sticky_bm(1.0, bad, dt=1e-4)


def test_timechange_deterministic():
    cfg = _tc_cfg(n_paths=2)
    a = simulate_timechange_sticky_bm(0.7, cfg, dt=1e-4)
    b = simulate_timechange_sticky_bm(0.7, cfg, dt=1e-4)
    for x, y in zip(a, b):
        assert np.array_equal(x.rec_values, y.rec_values)


def test_timechange_clock_strictly_increasing():
    from sticky_dbm.simulate import driving_motion_and_clock

    rng = path_rng(5, 0)
    B, gamma, dl = driving_motion_and_clock(rng, 10000, 1e-4, 5e-2, 1.0, 0.0)
    assert np.all(np.diff(gamma) > 0)            # gamma^{-1} is well defined
    assert np.all(np.diff(gamma) >= 0.5e-4)      # at least the dt part
    assert gamma[-1] >= 1.0                      # covers the horizon
    assert np.all(dl >= 0)

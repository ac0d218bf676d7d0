import math

import numpy as np
import pytest

from sticky_dbm.chain import GridSpec, build_chain
from sticky_dbm.errors import ContractViolation
from sticky_dbm.measure import (gaussian_density, points_1d, truncation_box)
from sticky_dbm.simulate import PathSample, SimConfig, simulate_chain
from sticky_dbm.stats import (Estimate, continuum_average, crossing_counts,
                              ergodic_average, fukushima_residual,
                              increment_moments, ks_two_sample, mean_ci,
                              sejour_fraction, small_ball_fraction)
from sticky_dbm.testfunctions import bump_1d, combine, default_catalog

DENSITY = gaussian_density(1)
STICKY = points_1d([0.0], 1.0)
BOX = truncation_box(6.0, 1)


@pytest.fixture(scope="module")
def chain():
    return build_chain(DENSITY, STICKY, GridSpec(0.1, BOX))


@pytest.fixture(scope="module")
def paths(chain):
    cfg = SimConfig(seed=31, T=2000.0, n_paths=8, start=0.0,
                    recording="snapshots", rec_dt=0.01)
    return simulate_chain(chain, cfg, threads=4)


def test_mean_ci_basic():
    est = mean_ci([1.0, 2.0, 3.0, 4.0])
    assert est.value == pytest.approx(2.5)
    assert est.ci_halfwidth == pytest.approx(1.959963984540054
                                             * np.std([1, 2, 3, 4], ddof=1) / 2.0)
    assert est.covers(2.5) and not est.covers(6.0)


def test_sejour_equals_ergodic_indicator_bitexact(chain, paths):
    est_s, tgt_s = sejour_fraction(paths, chain)
    est_e, tgt_e = ergodic_average(paths, chain,
                                   chain.sticky_mask.astype(float))
    assert est_s.value == est_e.value          # same code path, bit-identical
    assert tgt_s == tgt_e


def test_ergodic_rejects_nonfinite_observable(chain, paths):
    from sticky_dbm.errors import NumericalFailure

    with pytest.raises(NumericalFailure):
        ergodic_average(paths, chain,
                        lambda p: math.inf if p[0] == 0.0 else 1.0)


def test_empty_window_rejected(chain, paths):
    with pytest.raises(ContractViolation):
        sejour_fraction(paths, chain, T_burnin=paths[0].T)


def test_ergodic_constant_is_one(chain, paths):
    est, target = ergodic_average(paths, chain, lambda p: 1.0)
    assert target == 1.0
    assert est.value == pytest.approx(1.0, abs=1e-9)
    assert est.ci_halfwidth < 1e-9


def test_ergodic_x2_two_level(chain, paths):
    est, chain_target = ergodic_average(paths, chain, lambda p: p[0] ** 2)
    cont = continuum_average(DENSITY, STICKY, BOX, lambda p: p[0] ** 2)
    closed_form = (math.sqrt(math.pi) / 2) / (math.sqrt(math.pi) + 1)
    assert cont == pytest.approx(closed_form, abs=1e-9)
    assert abs(chain_target - cont) < 2e-3                # h-bias level
    assert abs(est.value - chain_target) <= 3 * est.ci_halfwidth


def test_sejour_continuum_closed_form():
    cont = continuum_average(
        DENSITY, STICKY, BOX,
        lambda p: 1.0 if abs(p[0]) <= 1e-12 else 0.0)
    assert cont == pytest.approx(1.0 / (1.0 + math.sqrt(math.pi)), abs=1e-6)


def test_low_weight_sejour_is_small():
    sticky = points_1d([0.0], 1e-9)
    ch = build_chain(DENSITY, sticky, GridSpec(0.02, BOX))
    ratio = ch.pi[ch.sticky_mask].sum() / ch.pi.sum()
    assert ratio < 0.05    # zero-weight limit: only the O(h) cell share remains


def _synthetic_path(chain, coords):
    states = np.array([chain.locate([c]) for c in coords], dtype=np.int32)
    times = np.arange(len(coords), dtype=float)
    return PathSample(sampler="chain", seed=0, index=0, T=float(len(coords)),
                      burnin=0.0, interpretation="jump",
                      start_state=int(states[0]), final_state=int(states[-1]),
                      event_times=times, event_states=states)


def test_crossing_count_examples(chain):
    h = chain.h
    alternating = _synthetic_path(chain, [-h, 0.0, h, 0.0, -h])
    assert crossing_counts([alternating], chain)[0] == 2
    one_sided = _synthetic_path(chain, [h, 2 * h, h, 3 * h, h])
    assert crossing_counts([one_sided], chain)[0] == 0
    through = _synthetic_path(chain, [-h, h, -h])
    assert crossing_counts([through], chain)[0] == 2


def test_crossing_count_time_reversal(chain):
    rng = np.random.default_rng(0)
    coords = rng.choice([-0.2, -0.1, 0.0, 0.1, 0.2], size=50)
    fwd = _synthetic_path(chain, coords)
    rev = _synthetic_path(chain, coords[::-1])
    assert crossing_counts([fwd], chain)[0] == crossing_counts([rev], chain)[0]


def test_ci_shrinks_like_sqrt_n():
    ch = build_chain(DENSITY, STICKY, GridSpec(0.25, truncation_box(3.0, 1)))
    cfg = SimConfig(seed=37, T=50.0, n_paths=512, start=0.0, recording="none")
    paths = simulate_chain(ch, cfg, threads=4)
    est_n, _ = sejour_fraction(paths[:256], ch)
    est_2n, _ = sejour_fraction(paths, ch)
    ratio = est_2n.ci_halfwidth / est_n.ci_halfwidth
    assert 0.6 <= ratio <= 0.85


def test_fukushima_zero_function(chain):
    cfg = SimConfig(seed=41, T=50.0, n_paths=4, start=0.0, burnin=0.0,
                    recording="none")
    paths = simulate_chain(chain, cfg)
    cat = default_catalog(STICKY)
    zero = combine(cat["kink"], cat["kink"], 1.0, -1.0)
    rep = fukushima_residual(paths, chain, zero, DENSITY, STICKY)
    assert rep.mean_MT == pytest.approx(0.0, abs=1e-12)
    assert rep.var_MT == pytest.approx(0.0, abs=1e-12)


def test_fukushima_identity_moderate(chain):
    cfg = SimConfig(seed=43, T=400.0, n_paths=48, start=0.0, burnin=0.0,
                    recording="none")
    paths = simulate_chain(chain, cfg, threads=4)
    rep = fukushima_residual(paths, chain, default_catalog(STICKY)["smooth"],
                             DENSITY, STICKY)
    assert rep.mean_within_3ci
    assert 0.75 <= rep.ratio <= 1.25   # loose: h = 0.1, modest path count


def test_fukushima_needs_full_window_occupancy(chain):
    cfg = SimConfig(seed=44, T=50.0, n_paths=2, start=0.0, recording="none")
    paths = simulate_chain(chain, cfg)   # default burnin = T/10 > 0
    with pytest.raises(ContractViolation):
        fukushima_residual(paths, chain, default_catalog(STICKY)["kink"],
                           DENSITY, STICKY)


def test_fukushima_support_check(chain):
    cfg = SimConfig(seed=45, T=10.0, n_paths=1, start=0.0, burnin=0.0,
                    recording="none")
    paths = simulate_chain(chain, cfg)
    wide = bump_1d(center=0.0, half_width=20.0)
    with pytest.raises(ContractViolation):
        fukushima_residual(paths, chain, wide, DENSITY, STICKY)


def test_increment_moment_preconditions(chain, paths):
    with pytest.raises(ContractViolation):
        increment_moments(paths, chain, [(0.1,)], delta=0.01)   # too close to A
    with pytest.raises(ContractViolation):
        increment_moments(paths, chain, [(5.95,)], delta=0.01)  # near boundary
    with pytest.raises(ContractViolation):
        increment_moments(paths, chain, [(0.5,)], delta=0.0137)  # not a multiple


def test_increment_moments_insufficient_flag(chain):
    cfg = SimConfig(seed=47, T=5.0, n_paths=1, start=0.0,
                    recording="snapshots", rec_dt=0.01)
    short = simulate_chain(chain, cfg)
    cells = increment_moments(short, chain, [(3.0,)], delta=0.01,
                              min_samples=200)
    assert cells[0].insufficient


def test_small_ball_fraction(chain, paths):
    frac = small_ball_fraction(paths[0], 0.1, chain=chain)
    indicator = (np.abs(chain.coords[:, 0]) <= 0.1 + 1e-12).astype(float)
    direct = float(np.dot(paths[0].occupancy, indicator)
                   / (paths[0].T - paths[0].burnin))
    assert frac == pytest.approx(direct, rel=1e-12)


def test_ks_two_sample():
    rng = np.random.default_rng(1)
    a = rng.normal(size=2000)
    b = rng.normal(size=2000)
    assert ks_two_sample(a, b) < 0.05
    assert ks_two_sample(a, b + 1.0) > 0.3


def test_report_builders(chain, paths):
    from sticky_dbm.stats import build_moment_report, build_occupancy_report
    from sticky_dbm.testfunctions import default_catalog

    occ = build_occupancy_report(paths, chain, DENSITY, STICKY, BOX,
                                 observables=[("x2", lambda p: p[0] ** 2)])
    assert occ.n_paths == len(paths)
    assert 0.0 <= occ.sejour.value <= 1.0
    assert occ.sejour.ci_halfwidth > 0
    assert occ.crossing_min >= 0 and occ.crossing_mean >= occ.crossing_min
    est, chain_t, cont = occ.ergodic["x2"]
    assert abs(chain_t - cont) < 0.01

    mom = build_moment_report(paths, chain, DENSITY, STICKY,
                              cells=[(0.5,)], delta=0.01, test_functions=())
    assert len(mom.cells) == 1 and mom.cells[0].n_samples > 0

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cogcap.mc import (
    McConfig, draw_channels, empirical_cdf, ks_distance, run, stream_generator, stream_sizes,
)
from cogcap.model import make_params_from_ratios

N = 1_000_000


def test_gain_means():
    p = make_params_from_ratios(0.1, 0.1)
    d = draw_channels(p, "S1", stream_generator(1, 0), N)
    for g, omega in ((d.g_p, p.Omega_p), (d.g_s, p.Omega_s), (d.g_ps, p.Omega_ps), (d.g_sp, p.Omega_sp)):
        assert abs(g.mean() - omega) < 3 * omega / math.sqrt(N)
    assert d.g_p_hat is None


def test_estimate_correlation():
    p = make_params_from_ratios(0.1, 0.1)
    d0 = draw_channels(p.replace(rho=0.0), "S5", stream_generator(2, 0), N)
    assert abs(np.corrcoef(d0.g_p, d0.g_p_hat)[0, 1]) < 0.005
    d = draw_channels(p, "S5", stream_generator(2, 0), N)
    assert np.corrcoef(d.g_p, d.g_p_hat)[0, 1] == pytest.approx(0.81, abs=0.01)
    assert np.corrcoef(d.g_sp, d.g_sp_hat)[0, 1] == pytest.approx(0.81, abs=0.01)
    # both true and estimated gains keep the Rayleigh marginal
    for g in (d.g_p, d.g_p_hat):
        assert abs(g.mean() - p.Omega_p) < 4 * p.Omega_p / math.sqrt(N)


def test_stream_sizes_partition():
    assert stream_sizes(10, 3) == [4, 3, 3]
    assert sum(stream_sizes(1_000_003, 8)) == 1_000_003


def test_streams_are_independent_of_each_other():
    a = stream_generator(5, 0).standard_normal(4)
    b = stream_generator(5, 1).standard_normal(4)
    c = stream_generator(5, 0, purpose=1).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(n_samples=0)
    with pytest.raises(ValueError):
        McConfig(stream_count=0)
    assert McConfig(scenario="2").scenario.value == "S2"


def test_empirical_cdf_examples():
    np.testing.assert_allclose(empirical_cdf([1, 2, 3], [0, 1.5, 3]).values, [0, 1 / 3, 1])
    step = empirical_cdf([2.0] * 5, [1.0, 1.999, 2.0, 3.0]).values
    np.testing.assert_array_equal(step, [0, 0, 1, 1])
    with pytest.raises(ValueError):
        empirical_cdf([], [0.0, 1.0])


def test_empirical_cdf_brute_force():
    rng = np.random.default_rng(0)
    x = rng.exponential(1.0, 1000)
    grid = np.linspace(0, 5, 77)
    brute = np.array([(x <= g).sum() / x.size for g in grid])
    np.testing.assert_array_equal(empirical_cdf(x, grid).values, brute)


def test_ks_distance_exact_cases():
    # uniform samples at the midpoints: sup gap is 1/(2n)
    n = 10
    x = (np.arange(n) + 0.5) / n
    assert ks_distance(x, lambda t: np.clip(t, 0, 1)) == pytest.approx(1 / (2 * n))
    # atom at zero: 3 of 10 samples are zero and the law puts 0.3 there
    x = np.concatenate([np.zeros(3), (np.arange(7) + 0.5) / 7])
    f = lambda t: np.where(t <= 0, 0.3, 0.3 + 0.7 * np.clip(t, 0, 1))
    assert ks_distance(x, f) == pytest.approx(0.05)
    assert ks_distance(x, f, atom_at_zero=False) == pytest.approx(0.3)


@given(st.integers(20, 400), st.integers(0, 2 ** 32 - 1))
def test_ks_distance_matches_scipy(n, seed):
    from scipy import stats
    x = np.random.default_rng(seed).exponential(1.0, n)
    cdf = lambda t: -np.expm1(-t)
    assert ks_distance(x, cdf, atom_at_zero=False) == pytest.approx(
        stats.kstest(x, cdf).statistic, abs=1e-12)


@pytest.fixture(scope="module")
def s2_run():
    p = make_params_from_ratios(0.1, 0.1)
    return p, run(p, McConfig(n_samples=N, scenario="S2"))


def test_s2_blocking_rate(s2_run):
    p, summ = s2_run
    target = 1 - math.exp(-p.c2)
    assert abs(summ.blocking_rate - target) < 3 * math.sqrt(target * (1 - target) / N)


def test_s2_constraint_rate(s2_run):
    p, summ = s2_run
    assert summ.constraint_count > 50_000
    assert abs(summ.constraint_satisfaction_rate - (1 - p.alpha)) < 3 * summ.constraint_sigma(p.alpha)


def test_summary_fields(s2_run):
    p, summ = s2_run
    assert summ.n_samples == N
    assert 0 <= summ.max_power_rate <= 1 and 0 <= summ.blocking_rate <= 1
    assert summ.empirical_capacity_cdf.values[0] == pytest.approx(summ.blocking_rate)
    assert summ.pt_cdf.values[-1] == 1.0
    assert summ.mean_capacity_se > 0
    assert summ.capacity_samples is None


def test_s4_blocking_is_deterministic():
    p = make_params_from_ratios(0.1, 0.1)
    assert run(p, McConfig(n_samples=10_000, scenario="S4")).blocking_rate == 0.0
    assert run(p.replace(alpha=0.05), McConfig(n_samples=10_000, scenario="S4")).blocking_rate == 1.0


def test_s1_constraint_met_with_equality():
    p = make_params_from_ratios(0.1, 0.1)
    assert run(p, McConfig(n_samples=100_000, scenario="S1")).constraint_satisfaction_rate == 1.0


def test_bit_reproducible():
    p = make_params_from_ratios(0.1, 0.1)
    for scenario in ("S1", "S5"):
        cfg = McConfig(n_samples=20_001, seed=99, scenario=scenario, stream_count=5)
        a = run(p, cfg, keep_samples=True)
        b = run(p, cfg, keep_samples=True)
        np.testing.assert_array_equal(a.capacity_samples, b.capacity_samples)
        np.testing.assert_array_equal(a.pt_samples, b.pt_samples)
        assert (a.blocking_rate, a.constraint_satisfaction_rate, a.mean_capacity) == \
            (b.blocking_rate, b.constraint_satisfaction_rate, b.mean_capacity)


def test_seed_changes_results():
    p = make_params_from_ratios(0.1, 0.1)
    a = run(p, McConfig(n_samples=5000, seed=1))
    b = run(p, McConfig(n_samples=5000, seed=2))
    assert a.mean_capacity != b.mean_capacity


def test_run_by_stream_equals_concatenation():
    # a run is the ordered concatenation of its per-stream blocks
    p = make_params_from_ratios(0.1, 0.1)
    full = run(p, McConfig(n_samples=300, seed=4, stream_count=3), keep_samples=True)
    from cogcap.mc import _run_stream
    caps = np.concatenate([_run_stream(p, full.empirical_capacity_cdf.scenario, 4, k, 100)[0]
                           for k in range(3)])
    np.testing.assert_array_equal(np.sort(caps), full.capacity_samples)

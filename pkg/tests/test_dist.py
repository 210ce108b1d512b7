import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate

from cogcap.dist import (
    DistributionCurve, Scenario3Shape, blocking_probability, capacity_cdf, capacity_cdf_callable,
    capacity_pdf, cdf_gamma, cdf_gamma_i, cdf_gamma_i_generic, mean_capacity, pdf_gamma,
    pdf_gamma_i, pt_cdf,
)
from cogcap.model import make_params_from_ratios
from cogcap.policy import power_s1, power_s2, power_s3, power_s4

ANALYTIC = ("S1", "S2", "S3", "S4")
POINTS = [(0.1, 0.1), (0.01, 0.1), (0.9, 0.1), (0.1, 0.5)]


def _simulate_sinr(scenario, p, n=1_000_000, seed=11):
    """Independent sampler: plain numpy draws pushed through the policy formulas."""
    rng = np.random.default_rng(seed)
    g_p = rng.exponential(p.Omega_p, n)
    g_s = rng.exponential(p.Omega_s, n)
    g_ps = rng.exponential(p.Omega_ps, n)
    g_sp = rng.exponential(p.Omega_sp, n)
    pt = {"S1": lambda: power_s1(p, g_p, g_sp).pt, "S2": lambda: power_s2(p, g_p).pt,
          "S3": lambda: power_s3(p, g_sp).pt, "S4": lambda: np.full(n, power_s4(p).pt)}[scenario]()
    return pt * g_s, pt * g_s / (p.Pp * g_ps + p.sigma2_s), pt


@pytest.fixture(scope="module")
def sims():
    p = make_params_from_ratios(0.1, 0.1)
    return p, {s: _simulate_sinr(s, p) for s in ANALYTIC}


# ---- blocking ------------------------------------------------------------------

def test_blocking_s1_s2():
    p = make_params_from_ratios(0.1, 0.1)
    for s in ("S1", "S2"):
        assert blocking_probability(s, p) == pytest.approx(1 - math.exp(-0.1), abs=1e-15)
    assert blocking_probability("S1", make_params_from_ratios(0.1, 1e-12)) < 1e-11


def test_blocking_s3_s4_switches_at_threshold():
    p = make_params_from_ratios(0.1, 0.1)
    edge = 1 - math.exp(-0.1)
    for s in ("S3", "S4"):
        assert blocking_probability(s, p.replace(alpha=edge * (1 - 1e-12))) == 1.0
        assert blocking_probability(s, p.replace(alpha=edge * (1 + 1e-12))) == 0.0


def test_blocking_s5_defaults():
    assert blocking_probability("S5", make_params_from_ratios(0.1, 0.5)) == pytest.approx(0.73, abs=0.02)
    assert blocking_probability("S5", make_params_from_ratios(0.1, 0.9)) == pytest.approx(0.88, abs=0.02)


def test_blocking_s5_matches_direct_simulation():
    p = make_params_from_ratios(0.1, 0.5)
    rng = np.random.default_rng(3)
    from cogcap.policy import s5_beta, s5_noncentrality_scale
    from scipy import stats
    lam1 = s5_noncentrality_scale(p) * rng.exponential(1.0, 200_000)
    blocked = stats.ncx2.cdf(s5_beta(p), 2, np.maximum(lam1, 1e-300)) >= p.alpha
    assert blocking_probability("S5", p) == pytest.approx(blocked.mean(), abs=0.004)


# ---- received power ---------------------------------------------------------

def test_s1_gamma_limit_at_zero():
    p = make_params_from_ratios(0.1, 0.1)
    assert cdf_gamma("S1", p, 1e-12) == pytest.approx(1 - math.exp(-p.c2), abs=1e-9)


def test_s4_gamma_median():
    p = make_params_from_ratios(0.1, 0.1)
    pt = power_s4(p).pt
    assert cdf_gamma("S4", p, pt * p.Omega_s * math.log(2)) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("scenario", ANALYTIC)
def test_gamma_cdf_against_simulation(sims, scenario):
    p, data = sims
    gamma = np.sort(data[scenario][0])
    x = np.array([0.05, 0.3, 1.0, 2.0, 5.0])
    emp = np.searchsorted(gamma, x, side="right") / gamma.size
    np.testing.assert_allclose(cdf_gamma(scenario, p, x), emp, atol=0.005)


@pytest.mark.parametrize("scenario", ANALYTIC)
def test_gamma_pdf_is_cdf_derivative(scenario):
    p = make_params_from_ratios(0.1, 0.1)
    for x in (0.2, 1.0, 3.0):
        h = 1e-5
        fd = (cdf_gamma(scenario, p, x + h) - cdf_gamma(scenario, p, x - h)) / (2 * h)
        assert pdf_gamma(scenario, p, x) == pytest.approx(fd, abs=1e-6)


# ---- SINR -------------------------------------------------------------------

@pytest.mark.parametrize("scenario", ANALYTIC)
def test_sinr_cdf_at_zero_is_blocking(scenario):
    p = make_params_from_ratios(0.1, 0.1)
    assert cdf_gamma_i(scenario, p, 0.0) == pytest.approx(blocking_probability(scenario, p), abs=1e-12)


def test_s4_sinr_closed_form_value():
    p = make_params_from_ratios(0.1, 0.1)
    pt = power_s4(p).pt
    y = 1.0
    ref = 1 - pt * p.Omega_s / (y * p.Pp * p.Omega_ps + pt * p.Omega_s) \
        * math.exp(-y * p.sigma2_s / (pt * p.Omega_s))
    assert cdf_gamma_i("S4", p, y) == pytest.approx(ref, abs=1e-14)
    assert cdf_gamma_i("S4", p, y) == pytest.approx(0.9020391, abs=1e-6)


@pytest.mark.parametrize("scenario", ANALYTIC)
def test_sinr_cdf_against_simulation(sims, scenario):
    p, data = sims
    sinr = np.sort(data[scenario][1])
    y = np.array([0.0, 0.1, 0.5, 1.0, 3.0, 10.0])
    emp = np.searchsorted(sinr, y, side="right") / sinr.size
    np.testing.assert_allclose(cdf_gamma_i(scenario, p, y), emp, atol=0.003)


@pytest.mark.parametrize("c1,c2", POINTS)
def test_s3_closed_form_matches_generic(c1, c2):
    p = make_params_from_ratios(c1, c2)
    y = np.linspace(0.01, 10, 50)
    np.testing.assert_allclose(cdf_gamma_i("S3", p, y), cdf_gamma_i_generic("S3", p, y), atol=1e-7)


@pytest.mark.parametrize("c1,c2", POINTS)
def test_s4_closed_form_matches_generic(c1, c2):
    p = make_params_from_ratios(c1, c2)
    y = np.geomspace(1e-3, 100, 60)
    np.testing.assert_allclose(cdf_gamma_i("S4", p, y), cdf_gamma_i_generic("S4", p, y), atol=1e-8)


@pytest.mark.parametrize("scenario", ("S1", "S2"))
def test_split_forms_match_generic(scenario):
    p = make_params_from_ratios(0.1, 0.1)
    y = np.geomspace(1e-3, 50, 25)
    np.testing.assert_allclose(cdf_gamma_i(scenario, p, y), cdf_gamma_i_generic(scenario, p, y),
                               atol=1e-8)


@pytest.mark.parametrize("scenario", ("S1", "S2", "S3"))
@pytest.mark.parametrize("c1", (0.1, 0.9))
def test_sinr_pdf_finite_difference(scenario, c1):
    p = make_params_from_ratios(c1, 0.1)
    h = 1e-4
    for y in (0.5, 1.0, 2.0):
        fd = (cdf_gamma_i(scenario, p, y + h) - cdf_gamma_i(scenario, p, y - h)) / (2 * h)
        assert pdf_gamma_i(scenario, p, y) == pytest.approx(fd, abs=1e-4)


@pytest.mark.parametrize("scenario", ("S1", "S2", "S3"))
def test_sinr_pdf_mass_excludes_atom(scenario):
    p = make_params_from_ratios(0.1, 0.1)
    f = lambda y: float(pdf_gamma_i(scenario, p, y))
    mass = sum(sp_integrate.quad(f, a, b, epsabs=1e-11, epsrel=1e-11, limit=200)[0]
               for a, b in ((0, 1e-3), (1e-3, 1), (1, 30), (30, np.inf)))
    assert mass == pytest.approx(1 - blocking_probability(scenario, p), abs=1e-6)


def test_s3_pdf_nonnegative():
    for c1 in (0.01, 0.1, 0.9):
        p = make_params_from_ratios(c1, 0.1)
        v = pdf_gamma_i("S3", p, np.geomspace(1e-4, 1e3, 200))
        assert np.all(v >= 0)


def test_s3_shape_positive_r():
    shape = Scenario3Shape.from_params(make_params_from_ratios(0.1, 0.1))
    y = np.geomspace(1e-6, 1e4, 100)
    assert np.all(shape.r(y) > 0)


@settings(max_examples=25)
@given(st.sampled_from(ANALYTIC), st.floats(0.005, 2.0), st.floats(0.01, 0.9))
def test_sinr_cdf_is_a_distribution(scenario, c1, c2):
    p = make_params_from_ratios(c1, c2)
    y = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 40)])
    f = np.asarray(cdf_gamma_i(scenario, p, y))
    assert np.all((f >= -1e-12) & (f <= 1 + 1e-12))
    assert np.all(np.diff(f) >= -1e-9)
    assert f[-1] > 1 - 0.01 or blocking_probability(scenario, p) == 1.0


# ---- capacity -----------------------------------------------------------------

@pytest.mark.parametrize("scenario", ANALYTIC)
def test_capacity_cdf_shape(scenario):
    p = make_params_from_ratios(0.1, 0.1)
    curve = capacity_cdf(scenario, p)
    assert isinstance(curve, DistributionCurve) and curve.kind == "cdf_capacity"
    assert curve.values[0] == pytest.approx(blocking_probability(scenario, p), abs=1e-12)
    assert np.all(np.diff(curve.values) >= -1e-12)
    assert curve.values[-1] > 0.99


def test_capacity_pdf_change_of_variable():
    p = make_params_from_ratios(0.1, 0.1)
    y = np.array([0.25, 1.0, 2.0])
    h = 1e-5
    fd = (capacity_cdf("S3", p, y + h).values - capacity_cdf("S3", p, y - h).values) / (2 * h)
    np.testing.assert_allclose(capacity_pdf("S3", p, y).values, fd, atol=1e-6)


@pytest.mark.parametrize("scenario", ANALYTIC)
@pytest.mark.parametrize("c1", (0.01, 0.1, 0.9))
def test_mean_capacity_two_paths(scenario, c1):
    p = make_params_from_ratios(c1, 0.1)
    a = mean_capacity(scenario, p, "pdf")
    b = mean_capacity(scenario, p, "tail")
    assert a == pytest.approx(b, abs=1e-4)


@pytest.mark.parametrize("scenario", ANALYTIC)
def test_mean_capacity_against_simulation(sims, scenario):
    p, data = sims
    cap = np.log2(1 + data[scenario][1])
    se = cap.std() / math.sqrt(cap.size)
    assert mean_capacity(scenario, p) == pytest.approx(cap.mean(), abs=4 * se)


def test_mean_capacity_blocked_regime_is_zero():
    p = make_params_from_ratios(0.1, 0.1, alpha=0.05)
    for s in ("S3", "S4"):
        assert mean_capacity(s, p) == 0.0


@pytest.mark.parametrize("scenario", ANALYTIC)
def test_capacity_callable_matches_direct(scenario):
    p = make_params_from_ratios(0.9, 0.1)
    f = capacity_cdf_callable(scenario, p)
    y = np.unique(np.concatenate([np.geomspace(1.3e-6, 0.97, 60), np.linspace(1.01, 8, 40)]))
    np.testing.assert_allclose(f(y), capacity_cdf(scenario, p, y).values, atol=1e-5)


# ---- transmit power ------------------------------------------------------------------

@pytest.mark.parametrize("scenario", ANALYTIC)
def test_pt_cdf_against_simulation(sims, scenario):
    p, data = sims
    pt = np.sort(data[scenario][2])
    grid = np.linspace(0, p.Pm, 11)
    emp = np.searchsorted(pt, grid, side="right") / pt.size
    np.testing.assert_allclose(pt_cdf(scenario, p, grid), emp, atol=0.003)


def test_distribution_curve_validates():
    with pytest.raises(ValueError):
        DistributionCurve([0.0, 0.0], [0.1, 0.2], "cdf_capacity", "S1")
    with pytest.raises(ValueError):
        DistributionCurve([0.0, 1.0], [0.1, 0.2], "histogram", "S1")

import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from scipy import integrate, stats

from hlflatency.distributions import (
    GEV_GUMBEL_THRESHOLD,
    Constant,
    Exponential,
    Gamma,
    Gev,
    cdf,
    from_spec,
    mean,
    parse_dist,
    pdf,
    sample,
    to_spec,
)
from hlflatency.errors import ParameterError, UndefinedMomentError
from hlflatency.kstest import ks_critical, ks_statistic

rates = st.floats(min_value=0.05, max_value=200.0)
shapes = st.floats(min_value=0.2, max_value=40.0)
xis = st.floats(min_value=-0.45, max_value=0.45)
scales = st.floats(min_value=0.01, max_value=5.0)
locs = st.floats(min_value=-5.0, max_value=5.0)


def scipy_gev(d):
    return stats.genextreme(c=-d.xi, loc=d.mu, scale=d.sigma)


# --- point values ----------------------------------------------------------

def test_exponential_pdf_at_zero_is_rate():
    assert pdf(Exponential(1.0), 0.0) == 1.0
    assert Exponential(94.5).pdf(0.0) == pytest.approx(94.5)


def test_gamma_shape_one_reduces_to_exponential():
    assert pdf(Gamma(1.0, 2.0), 0.5) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-14)
    assert cdf(Gamma(1.0, 3.0), 1.0) == pytest.approx(1.0 - math.exp(-3.0), rel=1e-14)


def test_gev_cdf_at_location_is_inverse_e():
    for xi in (-0.4, -1e-8, 0.0, 1e-8, 0.2105, 0.8):
        assert Gev(xi, 0.1441, 0.4797).cdf(0.4797) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_gamma_cdf_tends_to_one():
    assert Gamma(2.652, 3.458).cdf(1e6) == 1.0
    assert Gamma(2.652, 3.458).cdf(np.inf) == 1.0


@pytest.mark.parametrize("alpha,beta,expected", [(8.9573, 5.5858, 1.6035), (8.2069, 5.395, 1.5212)])
def test_gamma_mean_matches_table_values(alpha, beta, expected):
    assert mean(Gamma(alpha, beta)) == pytest.approx(expected, abs=1e-4)


def test_means():
    assert Exponential(94.5).mean() == pytest.approx(0.010582, abs=1e-6)
    assert Gev(0.0, 2.0, 1.0).mean() == pytest.approx(1.0 + 2.0 * np.euler_gamma, rel=1e-12)
    d = Gev(0.2105, 0.1441, 0.4797)
    assert d.mean() == pytest.approx(scipy_gev(d).mean(), rel=1e-12)
    d = Gev(-0.3, 0.5, 2.0)
    assert d.mean() == pytest.approx(scipy_gev(d).mean(), rel=1e-12)


@pytest.mark.parametrize("xi", [1.0, 1.5])
def test_gev_mean_undefined_for_heavy_tail(xi):
    with pytest.raises(UndefinedMomentError):
        Gev(xi, 1.0, 0.0).mean()


# --- parameter validation --------------------------------------------------

@pytest.mark.parametrize("factory", [
    lambda: Exponential(0.0),
    lambda: Exponential(-1.0),
    lambda: Exponential(math.nan),
    lambda: Gamma(0.0, 1.0),
    lambda: Gamma(1.0, -2.0),
    lambda: Gamma(math.inf, 1.0),
    lambda: Gev(0.1, 0.0, 0.0),
    lambda: Gev(math.nan, 1.0, 0.0),
    lambda: Gev(0.1, 1.0, math.inf),
    lambda: Constant(-1.0),
])
def test_invalid_parameters_rejected(factory):
    with pytest.raises(ParameterError):
        factory()


# --- oracles ---------------------------------------------------------------

@given(rates)
def test_exponential_matches_scipy(lam):
    d = Exponential(lam)
    x = np.linspace(0, 10 / lam, 50)
    ref = stats.expon(scale=1 / lam)
    np.testing.assert_allclose(d.pdf(x), ref.pdf(x), rtol=1e-12)
    np.testing.assert_allclose(d.cdf(x), ref.cdf(x), rtol=1e-12, atol=1e-15)


@given(shapes, rates)
def test_gamma_matches_scipy(alpha, beta):
    d = Gamma(alpha, beta)
    ref = stats.gamma(alpha, scale=1 / beta)
    x = ref.ppf(np.linspace(0.001, 0.999, 50))
    np.testing.assert_allclose(d.pdf(x), ref.pdf(x), rtol=1e-9)
    np.testing.assert_allclose(d.cdf(x), ref.cdf(x), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(d.logpdf(x), ref.logpdf(x), rtol=1e-9, atol=1e-9)


@given(xis, scales, locs)
@example(xi=1.192092896e-07, sigma=1.0, mu=0.0)
def test_gev_matches_scipy(xi, sigma, mu):
    d = Gev(xi, sigma, mu)
    ref = scipy_gev(d)
    x = ref.ppf(np.linspace(0.001, 0.999, 50))
    np.testing.assert_allclose(d.pdf(x), ref.pdf(x), rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(d.cdf(x), ref.cdf(x), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(d.quantile(np.linspace(0.01, 0.99, 9)), ref.ppf(np.linspace(0.01, 0.99, 9)),
                               rtol=1e-9, atol=1e-12)


# --- structural properties -------------------------------------------------

def _support_integral(d, upper):
    lo, hi = d.support()
    if isinstance(d, Gev):
        # split at quantiles so a heavy tail spanning many decades is resolved piecewise
        cuts = d.quantile(np.array([1e-14, 1e-6, 0.01, 0.5, 0.99, 1 - 1e-4, 1 - 1e-6, 1 - 1e-8, 1 - 1e-10,
                                    1 - 1e-14]))
    else:
        cuts = np.array([lo, hi])
    cuts = np.minimum(cuts, upper)
    return sum(integrate.quad(d.pdf, a, b, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
               for a, b in zip(cuts[:-1], cuts[1:]) if b > a)


def _gamma_integral(d, upper):
    # x^(alpha-1) is integrated exactly by the algebraic weight; the rest is smooth
    smooth = lambda x: math.exp(d.alpha * math.log(d.beta) - d.beta * x - math.lgamma(d.alpha))
    return integrate.quad(smooth, 0.0, upper, weight="alg", wvar=(d.alpha - 1.0, 0.0), limit=200)[0]


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@given(shapes, rates)
def test_gamma_normalised_and_consistent(alpha, beta):
    d = Gamma(alpha, beta)
    hi = stats.gamma(alpha, scale=1 / beta).ppf(1 - 1e-13)
    assert _gamma_integral(d, hi) == pytest.approx(1.0, abs=1e-6)
    for q in (0.05, 0.3, 0.5, 0.8, 0.97):
        x = stats.gamma(alpha, scale=1 / beta).ppf(q)
        assert _gamma_integral(d, x) == pytest.approx(d.cdf(x), abs=1e-6)


@given(xis, scales, locs)
@example(xi=0.375, sigma=1.0, mu=0.0)
def test_gev_normalised(xi, sigma, mu):
    d = Gev(xi, sigma, mu)
    assert _support_integral(d, math.inf) == pytest.approx(1.0, abs=1e-6)


@given(shapes, rates)
def test_gamma_one_equals_exponential_pointwise(_alpha, beta):
    x = np.linspace(0, 20 / beta, 100)
    np.testing.assert_allclose(Gamma(1.0, beta).pdf(x), Exponential(beta).pdf(x), rtol=1e-12, atol=0)
    np.testing.assert_allclose(Gamma(1.0, beta).cdf(x), Exponential(beta).cdf(x), rtol=1e-12, atol=1e-15)


@given(scales, locs)
def test_gev_branch_continuity_near_zero_shape(sigma, mu):
    x = mu + sigma * np.linspace(-2, 6, 41)
    gumbel = Gev(0.0, sigma, mu)
    for xi in (1e-8, -1e-8):
        d = Gev(xi, sigma, mu)
        np.testing.assert_allclose(d.pdf(x), gumbel.pdf(x), atol=1e-5)
        np.testing.assert_allclose(d.cdf(x), gumbel.cdf(x), atol=1e-5)


def test_gumbel_threshold_dispatch():
    assert Gev(0.0, 1.0, 0.0).is_gumbel
    assert Gev(GEV_GUMBEL_THRESHOLD / 2, 1.0, 0.0).is_gumbel
    assert not Gev(1e-12, 1.0, 0.0).is_gumbel
    assert Gev(0.0, 1.0, 0.0).support() == (-math.inf, math.inf)


@pytest.mark.parametrize("xi", [1e-12, -3e-10, 7e-9, 5e-7, -2e-6, 1e-4])
def test_tiny_shape_stays_accurate(xi):
    d, ref = Gev(xi, 1.3, 0.2), stats.genextreme(-xi, loc=0.2, scale=1.3)
    x = ref.ppf(np.linspace(0.001, 0.999, 25))
    np.testing.assert_allclose(d.pdf(x), ref.pdf(x), rtol=1e-12)
    np.testing.assert_allclose(d.cdf(x), ref.cdf(x), rtol=1e-12)
    np.testing.assert_allclose(d.quantile(np.linspace(0.01, 0.99, 9)), ref.ppf(np.linspace(0.01, 0.99, 9)),
                               rtol=1e-11)
    # (gamma(1 - xi) - 1) / xi from mpmath at 40 digits, frozen
    excess = {1e-12: 0.5772156649025219166, -3e-10: 0.57721566460481606209, 7e-9: 0.57721567182492487237,
              5e-7: 0.57721615942975739448, -2e-6: 0.57721368679317211311, 1e-4: 0.57731457957683824497}[xi]
    assert d.mean() == pytest.approx(0.2 + 1.3 * excess, rel=1e-14)


@given(xis, scales, locs)
def test_cdf_monotone_pdf_nonnegative(xi, sigma, mu):
    d = Gev(xi, sigma, mu)
    x = np.linspace(mu - 20 * sigma, mu + 40 * sigma, 500)
    f = d.cdf(x)
    assert np.all(np.diff(f) >= 0)
    assert np.all((f >= 0) & (f <= 1))
    assert np.all(d.pdf(x) >= 0)


def test_out_of_support_is_clamped_not_raised():
    frechet = Gev(0.5, 1.0, 0.0)  # lower bound -2
    assert frechet.pdf(-3.0) == 0.0 and frechet.cdf(-3.0) == 0.0
    weibull = Gev(-0.5, 1.0, 0.0)  # upper bound 2
    assert weibull.pdf(3.0) == 0.0 and weibull.cdf(3.0) == 1.0
    assert Gamma(2.0, 1.0).pdf(-1.0) == 0.0 and Gamma(2.0, 1.0).cdf(-1.0) == 0.0
    assert Exponential(1.0).cdf(-5.0) == 0.0
    assert Gamma(2.0, 1.0).logpdf(-1.0) == -math.inf


def test_scalar_in_scalar_out():
    for d in (Exponential(2.0), Gamma(2.0, 1.0), Gev(0.1, 1.0, 0.0)):
        assert isinstance(d.pdf(0.5), float)
        assert isinstance(d.cdf(0.5), float)
        assert isinstance(d.sample(np.random.default_rng(0)), float)


# --- samplers --------------------------------------------------------------

def test_exponential_sampler_mean():
    x = Exponential(94.5).sample(np.random.default_rng(1), 1_000_000)
    assert x.mean() == pytest.approx(1 / 94.5, rel=0.01)


def test_gamma_sampler_mean():
    x = Gamma(2.652, 3.458).sample(np.random.default_rng(2), 1_000_000)
    assert x.mean() == pytest.approx(0.7669, rel=0.01)


def test_gumbel_sampler_median():
    x = Gev(0.0, 1.0, 0.0).sample(np.random.default_rng(3), 1_000_000)
    assert np.median(x) == pytest.approx(-math.log(math.log(2.0)), rel=0.02)


@pytest.mark.parametrize("d", [
    Exponential(94.5),
    Gamma(7.362, 5.445),
    Gamma(0.3, 2.0),  # alpha < 1 boost path
    Gev(0.2105, 0.1441, 0.4797),
    Gev(-0.3, 0.5, 1.0),
    Gev(0.0, 1.0, 0.0),
])
def test_sampler_passes_own_ks(d):
    x = d.sample(np.random.default_rng(4), 100_000)
    assert ks_statistic(x, d) < ks_critical(x.size, 0.01)


def test_sampling_is_deterministic_per_seed():
    for d in (Exponential(3.0), Gamma(2.5, 1.0), Gev(0.1, 1.0, 0.0)):
        a = sample(d, np.random.default_rng(9), 100)
        b = sample(d, np.random.default_rng(9), 100)
        np.testing.assert_array_equal(a, b)


def test_constant_point_mass():
    c = Constant(0.25)
    assert c.mean() == 0.25
    np.testing.assert_array_equal(c.sample(np.random.default_rng(0), 3), [0.25] * 3)
    assert c.cdf(0.2) == 0.0 and c.cdf(0.25) == 1.0


# --- text specs ------------------------------------------------------------

def test_parse_dist_keyword_and_positional():
    assert parse_dist("gamma:alpha=2,beta=3") == Gamma(2.0, 3.0)
    assert parse_dist("gamma:2,3") == Gamma(2.0, 3.0)
    assert parse_dist("exp:94.5") == Exponential(94.5)
    assert parse_dist("GEV: xi=0.2, sigma=0.1, mu=0.5") == Gev(0.2, 0.1, 0.5)
    assert parse_dist("const:0") == Constant(0.0)


@pytest.mark.parametrize("text", ["weibull:1,2", "gamma:1", "gamma:1,2,3", "gamma:alpha=x,beta=1", "exp:-1"])
def test_parse_dist_errors(text):
    with pytest.raises(ParameterError):
        parse_dist(text)


def test_spec_round_trip():
    for d in (Exponential(94.5), Gamma(2.0, 3.0), Gev(0.1, 0.2, 0.3), Constant(1.0)):
        spec = to_spec(d)
        assert from_spec(spec["family"], spec["params"]) == d

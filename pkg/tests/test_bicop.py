import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cherryvine.bicop import (BivariateCopula, Family, cdf, density, empirical_tau,
                              fit_bicop, h_function, h_inverse, log_likelihood,
                              param_to_tau, sample_pairs, tau_to_param)
from cherryvine.errors import DataError, ParameterError

from oracles import clayton_tau_quadrature, kendall_tau_brute

# three parameters per family, spread over weak to strong dependence
FLEET = {
    "gaussian": (-0.7, 0.3, 0.9),
    "clayton": (0.5, 2.0, 6.0),
    "gumbel": (1.3, 2.5, 5.0),
    "frank": (-5.0, 2.0, 10.0),
}
ALL = [BivariateCopula(f, p) for f, ps in FLEET.items() for p in ps]
GRID = np.arange(1, 22) / 22.0

interior = st.floats(min_value=1e-3, max_value=1 - 1e-3)


def test_family_parse():
    assert Family.parse("Gumbel") is Family.GUMBEL
    with pytest.raises(ParameterError):
        Family.parse("bb1")


@pytest.mark.parametrize("family,param", [
    ("gaussian", 1.0), ("gaussian", -1.2), ("clayton", 0.0), ("clayton", -1.0),
    ("gumbel", 0.9), ("frank", 0.0), ("frank", math.inf),
])
def test_parameter_domain(family, param):
    with pytest.raises(ParameterError):
        BivariateCopula(family, param)


# -- density -------------------------------------------------------------------

def test_gaussian_zero_is_uniform():
    u = np.linspace(0.01, 0.99, 17)
    np.testing.assert_allclose(density(BivariateCopula("gaussian", 0.0), u, u[::-1]), 1.0,
                               atol=1e-15)


def test_gaussian_density_at_centre():
    c = BivariateCopula("gaussian", 0.5)
    assert density(c, 0.5, 0.5) == pytest.approx(1 / math.sqrt(0.75), abs=1e-14)
    # cross-check by central differences of the CDF
    h = 1e-4
    fd = (cdf(c, .5 + h, .5 + h) - cdf(c, .5 + h, .5 - h)
          - cdf(c, .5 - h, .5 + h) + cdf(c, .5 - h, .5 - h)) / (4 * h * h)
    assert fd == pytest.approx(1 / math.sqrt(0.75), abs=1e-5)


def test_clayton_near_zero_is_uniform():
    assert density(BivariateCopula("clayton", 1e-6), 0.3, 0.7) == pytest.approx(1.0, abs=1e-4)


def test_independence_density():
    c = BivariateCopula.independence()
    assert density(c, 0.2, 0.9) == 1.0
    assert c.n_params == 0 and c.is_independence


@pytest.mark.parametrize("c", ALL, ids=str)
def test_density_is_symmetric(c):
    u, v = np.meshgrid(GRID, GRID)
    np.testing.assert_allclose(c.logpdf(u, v), c.logpdf(v, u), rtol=1e-10, atol=1e-10)


# -- cdf -----------------------------------------------------------------------

def test_independence_cdf():
    assert cdf(BivariateCopula.independence(), 0.3, 0.7) == pytest.approx(0.21)


def test_gaussian_near_comonotone():
    z = stats.norm.ppf(0.4)
    for rho in (0.99, 0.9999):
        oracle = stats.multivariate_normal(cov=[[1, rho], [rho, 1]]).cdf([z, z])
        assert cdf(BivariateCopula("gaussian", rho), 0.4, 0.4) == pytest.approx(oracle, abs=1e-6)
    # the comonotone bound is approached from below; the window [u - 0.01, u]
    # is reached only beyond rho = 0.99 (C = 0.3782 there)
    vals = [cdf(BivariateCopula("gaussian", r), 0.4, 0.4) for r in (0.9, 0.99, 0.9999)]
    assert vals == sorted(vals) and vals[-1] <= 0.4
    assert 0.4 - 1e-2 <= vals[-1]


@pytest.mark.parametrize("c", ALL, ids=str)
def test_cdf_margins(c):
    np.testing.assert_allclose(c.cdf(GRID, 1 - 1e-12), GRID, atol=1e-6)
    np.testing.assert_allclose(c.cdf(1 - 1e-12, GRID), GRID, atol=1e-6)


@pytest.mark.parametrize("c", ALL, ids=str)
def test_cdf_is_two_increasing(c):
    g = np.concatenate([[0.0], GRID, [1.0]])
    u, v = np.meshgrid(g, g, indexing="ij")
    C = c.cdf(u, v)
    rect = C[1:, 1:] - C[:-1, 1:] - C[1:, :-1] + C[:-1, :-1]
    assert rect.min() > -1e-12


# -- h-function ----------------------------------------------------------------

def test_gaussian_h_at_median():
    c = BivariateCopula("gaussian", 0.5)
    assert h_function(c, 0.5, 0.5) == pytest.approx(0.5, abs=1e-15)
    u, v = 0.3, 0.8
    closed = stats.norm.cdf((stats.norm.ppf(u) - 0.5 * stats.norm.ppf(v)) / math.sqrt(0.75))
    assert h_function(c, u, v) == pytest.approx(closed, abs=1e-14)


def test_independence_h_is_identity():
    c = BivariateCopula.independence()
    assert h_function(c, 0.37, 0.9) == pytest.approx(0.37)
    assert h_inverse(c, 0.37, 0.9) == pytest.approx(0.37)


@pytest.mark.parametrize("c", ALL, ids=str)
def test_h_matches_cdf_differences(c):
    step = 1e-5
    u, v = np.meshgrid(GRID, GRID)
    fd = (c.cdf(u, v + step) - c.cdf(u, v - step)) / (2 * step)
    assert np.max(np.abs(c.h(u, v) - fd)) <= 1e-5


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL), interior, interior, interior)
def test_h_is_monotone_in_target(c, u1, u2, v):
    lo, hi = sorted((u1, u2))
    assert c.h(lo, v) <= c.h(hi, v) + 1e-14


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(ALL), interior, interior)
def test_h_inverse_round_trip(c, w, v):
    assert c.h(c.h_inverse(w, v), v) == pytest.approx(w, abs=1e-8)


def test_gaussian_h_inverse_median():
    assert h_inverse(BivariateCopula("gaussian", 0.5), 0.5, 0.5) == pytest.approx(0.5, abs=1e-15)


# -- tau -----------------------------------------------------------------------

def test_tau_closed_forms():
    assert param_to_tau(BivariateCopula("clayton", 2.0)) == pytest.approx(0.5, abs=1e-15)
    assert clayton_tau_quadrature(2.0) == pytest.approx(0.5, abs=1e-4)
    assert param_to_tau(BivariateCopula("gumbel", 1.0)) == 0.0
    assert param_to_tau(BivariateCopula("gaussian", 1 - 1e-12)) == pytest.approx(1.0, abs=1e-5)
    assert param_to_tau(BivariateCopula.independence()) == 0.0


def test_tau_inversion_examples():
    assert tau_to_param("gaussian", 0.0).parameter == 0.0
    assert tau_to_param("clayton", 0.5).parameter == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ParameterError):
        tau_to_param("gumbel", -0.2)
    with pytest.raises(ParameterError):
        tau_to_param("frank", 0.0)


def test_frank_tau_matches_quadrature():
    from scipy import integrate
    c = BivariateCopula("frank", 4.0)
    inner, _ = integrate.dblquad(lambda v, u: c.h(v, u) * c.h(u, v), 0, 1, 0, 1,
                                 epsabs=1e-11)
    assert c.tau() == pytest.approx(1 - 4 * inner, abs=1e-8)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(["gaussian", "clayton", "gumbel", "frank"]),
       st.floats(min_value=-0.95, max_value=0.95))
def test_tau_round_trip(family, tau):
    if family in ("clayton", "gumbel") and tau <= 0.0:
        tau = abs(tau) + 0.01
    if family == "frank" and abs(tau) < 1e-6:
        tau = 0.01
    assert param_to_tau(tau_to_param(family, tau)) == pytest.approx(tau, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=12))
def test_empirical_tau_matches_pair_count(pairs):
    x, y = map(np.array, zip(*pairs))
    assert empirical_tau(x, y) == pytest.approx(kendall_tau_brute(x, y), abs=1e-12)


# -- fitting -------------------------------------------------------------------

def test_fit_independent_pairs():
    rng = np.random.default_rng(11)
    n = 2000
    u, v = rng.random(n), rng.random(n)
    c = fit_bicop(u, v, "gaussian")
    assert abs(c.tau()) <= 3 / math.sqrt(n)


@pytest.mark.parametrize("method", ["itau", "mle"])
def test_fit_gaussian(method):
    x = sample_pairs(BivariateCopula("gaussian", 0.6), 2000, np.random.default_rng(5))
    c = fit_bicop(x[:, 0], x[:, 1], "gaussian", method=method)
    assert c.parameter == pytest.approx(0.6, abs=0.05)


def test_mle_does_not_lower_likelihood():
    x = sample_pairs(BivariateCopula("clayton", 3.0), 500, np.random.default_rng(9))
    itau = fit_bicop(x[:, 0], x[:, 1], "clayton")
    mle = fit_bicop(x[:, 0], x[:, 1], "clayton", method="mle")
    assert log_likelihood(mle, x[:, 0], x[:, 1]) >= log_likelihood(itau, x[:, 0], x[:, 1]) - 1e-9


def test_fit_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(DataError):
        fit_bicop(np.full(50, 0.5), rng.random(50), "gaussian")
    with pytest.raises(DataError):
        fit_bicop(rng.random(5), rng.random(5), "gaussian")
    x = sample_pairs(BivariateCopula("gaussian", -0.6), 300, rng)
    with pytest.raises(ParameterError):
        fit_bicop(x[:, 0], x[:, 1], "gumbel")


@pytest.mark.parametrize("c", ALL, ids=str)
def test_density_integrates_to_one(c):
    # 401 x 401 trapezoid grid in normal scores u = Phi(z): the change of
    # variables tames the unbounded corners of tail-dependent families
    z = np.linspace(-8, 8, 401)
    w = stats.norm.pdf(z) * (z[1] - z[0])
    u, v = np.meshgrid(stats.norm.cdf(z), stats.norm.cdf(z), indexing="ij")
    assert np.sum(c.pdf(u, v) * np.outer(w, w)) == pytest.approx(1.0, abs=1e-3)


def test_to_dict():
    assert BivariateCopula("frank", 2.0).to_dict() == {"family": "frank", "parameter": 2.0}


@pytest.mark.parametrize("theta", [-29.0, 27.4, 29.8])
def test_frank_round_trip_in_strong_dependence(theta):
    c = BivariateCopula("frank", theta)
    w, v = np.meshgrid(np.linspace(0.001, 0.999, 41), np.linspace(0.001, 0.999, 41))
    assert np.max(np.abs(c.h(c.h_inverse(w, v), v) - w)) <= 1e-9

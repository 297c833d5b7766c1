import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cherryvine.bicop import BivariateCopula
from cherryvine.errors import DataError, NumericalError
from cherryvine.evalm import information_criteria, kl_divergence_mc, log_likelihood
from cherryvine.learn import fit_truncated_vine, pseudo_observations
from cherryvine.vine_model import (VineModel, c_vine_structure, d_vine_structure,
                                   junction_tree_log_density, log_density, sample,
                                   to_cherry_tree_copula, truncate)

from models import mixed_model, star_then_path_structure, structure_fleet

# KL between bivariate Gaussian copulas rho = 0.5 and rho = 0, from
# oracles.gaussian_kl_quadrature (2-D quadrature in normal scores)
KL_GAUSS_05_VS_0 = 0.14384103622589053


def pair_model(family, param):
    c = BivariateCopula(family, param)
    return VineModel(d_vine_structure(2), {(1, 2, frozenset()): c})


def sampler(m):
    return lambda n, s: sample(m, n, s)


# -- log-likelihood ---------------------------------------------------------------

def test_independence_loglik_is_zero():
    x = np.random.default_rng(0).random((50, 4))
    assert log_likelihood(VineModel.independence(c_vine_structure(4)), x) == 0.0


def test_gaussian_loglik_matches_negative_entropy():
    rho = 0.6
    m = pair_model("gaussian", rho)
    ld = log_density(m, sample(m, 10_000, seed=1))
    expected = -0.5 * math.log(1 - rho ** 2)
    se = ld.std(ddof=1) / math.sqrt(ld.size)
    assert abs(ld.mean() - expected) <= 3 * se


def test_loglik_row_permutation_and_additivity():
    m = mixed_model(c_vine_structure(4), np.random.default_rng(2))
    x = sample(m, 300, seed=2)
    full = log_likelihood(m, x)
    perm = np.random.default_rng(3).permutation(300)
    assert log_likelihood(m, x[perm]) == pytest.approx(full, rel=1e-12)
    parts = log_likelihood(m, x[:100]) + log_likelihood(m, x[100:])
    assert parts == pytest.approx(full, rel=1e-12)


def test_loglik_dimension_mismatch():
    with pytest.raises(DataError):
        log_likelihood(VineModel.independence(c_vine_structure(4)), np.full((5, 3), 0.5))


# -- information criteria ---------------------------------------------------------

def test_independence_criteria():
    x = np.random.default_rng(4).random((30, 3))
    assert information_criteria(VineModel.independence(d_vine_structure(3)), x) == (0.0, 0.0, 0)


def test_criteria_formulas():
    m = mixed_model(d_vine_structure(4), np.random.default_rng(5))
    x = sample(m, 400, seed=5)
    aic, bic, k = information_criteria(m, x)
    ll = log_likelihood(m, x)
    assert k == 6
    assert aic == pytest.approx(-2 * ll + 12)
    assert bic == pytest.approx(-2 * ll + 6 * math.log(400))


def test_independence_link_adds_nothing():
    m = truncate(mixed_model(d_vine_structure(4), np.random.default_rng(6)), 2)
    x = sample(m, 200, seed=6)
    assert information_criteria(m, x)[2] == 5
    # swapping an independence copula for another independence copula
    same = m.with_copulas({(1, 4, frozenset({2, 3})): BivariateCopula.independence()})
    assert information_criteria(same, x) == information_criteria(m, x)


# -- KL divergence ------------------------------------------------------------------

@pytest.mark.parametrize("structure", list(structure_fleet()), ids=lambda s: f"d{s.d}")
def test_self_divergence_is_exactly_zero(structure):
    m = mixed_model(structure, np.random.default_rng(7))
    f = lambda x: log_density(m, x)
    est = kl_divergence_mc(f, f, sampler(m), 500, seed=7)
    assert est.value == 0.0 and est.std_error == 0.0
    assert est.n_samples == 500 and est.seed == 7


def test_truncated_vine_against_its_cherry_form():
    m = truncate(mixed_model(c_vine_structure(5), np.random.default_rng(8)), 2)
    jm = to_cherry_tree_copula(m, 2)
    est = kl_divergence_mc(lambda x: log_density(m, x),
                           lambda x: junction_tree_log_density(jm, x),
                           sampler(m), 2000, seed=8)
    assert abs(est.value) <= 1e-9


def test_gaussian_kl_matches_quadrature():
    p, q = pair_model("gaussian", 0.5), pair_model("gaussian", 0.0)
    est = kl_divergence_mc(lambda x: log_density(p, x), lambda x: log_density(q, x),
                           sampler(p), 20_000, seed=9)
    assert abs(est.value - KL_GAUSS_05_VS_0) <= 3 * est.std_error
    assert KL_GAUSS_05_VS_0 == pytest.approx(-0.5 * math.log(0.75), abs=1e-12)


def test_kl_is_deterministic_and_chunked():
    p, q = pair_model("clayton", 2.0), pair_model("gumbel", 2.0)
    args = (lambda x: log_density(p, x), lambda x: log_density(q, x), sampler(p))
    a = kl_divergence_mc(*args, 5000, seed=10)
    assert a == kl_divergence_mc(*args, 5000, seed=10)
    assert a.value > 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_kl_between_distinct_models_nonnegative(seed):
    rng = np.random.default_rng(seed)
    s = d_vine_structure(3)
    p, q = mixed_model(s, rng), mixed_model(s, rng)
    est = kl_divergence_mc(lambda x: log_density(p, x), lambda x: log_density(q, x),
                           sampler(p), 1000, seed=seed)
    assert est.value >= -3 * est.std_error


def test_kl_reports_vanishing_q():
    p = pair_model("gaussian", 0.3)

    def log_q(x):
        out = np.zeros(len(x))
        out[3] = -np.inf
        return out

    with pytest.raises(NumericalError):
        kl_divergence_mc(lambda x: log_density(p, x), log_q, sampler(p), 200, seed=0)
    with pytest.raises(ValueError):
        kl_divergence_mc(lambda x: log_density(p, x), log_q, sampler(p), 50, seed=0)


def test_bic_prefers_true_truncation_level():
    # data from a level-1 truncated (Markov tree) model; compare levels 1 and 2
    s = star_then_path_structure()
    truth = truncate(mixed_model(s, np.random.default_rng(11), (0.3, 0.6)), 1)
    wins = 0
    for seed in range(50):
        po = pseudo_observations(sample(truth, 2000, seed=100 + seed))
        m1 = fit_truncated_vine(po, 1, ["gaussian", "clayton", "gumbel", "frank"])
        m2 = fit_truncated_vine(po, 2, ["gaussian", "clayton", "gumbel", "frank"])
        wins += information_criteria(m1, po)[1] < information_criteria(m2, po)[1]
    assert wins >= 40

"""
Model assessment: log-likelihood, information criteria and Monte-Carlo
Kullback-Leibler divergence between copula densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError, NumericalError
from .learn import as_pseudo_observations
from .vine_model import VineModel, log_density

KL_CHUNK = 4096


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int


def log_likelihood(m: VineModel, po) -> float:
    """Sum of log densities over the rows of ``po``."""
    po = as_pseudo_observations(po)
    if po.d != m.d:
        raise DataError(f"data have {po.d} columns, model has {m.d} variables")
    logd = log_density(m, po.values)
    return float(np.sum(logd))


def information_criteria(m: VineModel, po) -> tuple:
    """Return ``(aic, bic, n_params)``; independence links carry no parameter."""
    po = as_pseudo_observations(po)
    ll = log_likelihood(m, po)
    k = sum(c.n_params for c in m.pair_copulas.values())
    aic = -2.0 * ll + 2.0 * k
    bic = -2.0 * ll + k * math.log(po.n)
    return aic, bic, k


def kl_divergence_mc(log_p: Callable, log_q: Callable, sampler: Callable,
                     n: int, seed: int) -> DivergenceEstimate:
    """
    Estimate ``KL(p; q) = E_p[log p - log q]`` by Monte Carlo.

    Parameters
    ----------
    log_p, log_q : callable
        Map an ``(m, d)`` array of points to log densities.
    sampler : callable
        ``sampler(m, seed)`` draws ``m`` points from ``p``.
    n : int
        Number of draws, at least 100.  Draws are taken in chunks of
        ``KL_CHUNK`` with seeds spawned from ``seed``.

    Raises
    ------
    NumericalError
        If ``q`` has zero density at a sampled point.
    """
    if n < 100:
        raise ValueError("at least 100 samples are required")
    seeds = np.random.SeedSequence(seed).spawn(math.ceil(n / KL_CHUNK))
    terms = []
    for c, ss in enumerate(seeds):
        size = min(KL_CHUNK, n - c * KL_CHUNK)
        chunk_seed = int(ss.generate_state(1)[0])
        x = sampler(size, chunk_seed)
        lp = np.asarray(log_p(x), dtype=float)
        try:
            lq = np.asarray(log_q(x), dtype=float)
        except NumericalError as exc:
            raise NumericalError(f"q vanishes at a sample drawn from p: {exc}") from exc
        if not np.all(np.isfinite(lq)):
            row = int(np.flatnonzero(~np.isfinite(lq))[0])
            raise NumericalError(f"q vanishes at sample {c * KL_CHUNK + row}")
        terms.append(lp - lq)
    r = np.concatenate(terms)
    sd = float(np.std(r, ddof=1)) if r.size > 1 else 0.0
    return DivergenceEstimate(float(np.mean(r)), sd / math.sqrt(r.size), int(r.size), int(seed))


__all__ = ["DivergenceEstimate", "log_likelihood", "information_criteria",
           "kl_divergence_mc"]

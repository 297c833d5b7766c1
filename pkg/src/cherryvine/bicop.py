"""
Bivariate copula families used as pair copulas.

All functions are vectorised over numpy arrays.  Arguments on the unit
interval are clamped to ``[EPS, 1 - EPS]`` before evaluation.

``h(u | v)`` denotes the conditional distribution ``dC(u, v) / dv``.  Every
family here is exchangeable, so ``dC(u, v) / du`` is ``h(v | u)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import ConvergenceError, DataError, ParameterError

EPS = 1e-10


class Family(str, Enum):
    INDEPENDENCE = "independence"
    GAUSSIAN = "gaussian"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, Family):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown copula family {name!r}") from None


def clamp(x):
    return np.clip(np.asarray(x, dtype=float), EPS, 1.0 - EPS)


# --------------------------------------------------------------------------
# Gaussian


def _gauss_logpdf(rho, u, v):
    x, y = special.ndtri(u), special.ndtri(v)
    s = 1.0 - rho * rho
    return -0.5 * np.log(s) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * s)


def _bvn_cdf(x, y, rho):
    """P(X <= x, Y <= y) for a standard bivariate normal, via Owen's T."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    r = math.sqrt(1.0 - rho * rho)
    out = np.empty(x.shape)
    both0 = (x == 0) & (y == 0)
    out[both0] = 0.25 + math.asin(rho) / (2.0 * math.pi)
    rest = ~both0
    xs, ys = x[rest], y[rest]
    with np.errstate(divide="ignore", invalid="ignore"):
        ax = (ys - rho * xs) / (xs * r)
        ay = (xs - rho * ys) / (ys * r)
        tx = np.where(xs == 0, np.sign(ys - rho * xs) * 0.25, special.owens_t(xs, ax))
        ty = np.where(ys == 0, np.sign(xs - rho * ys) * 0.25, special.owens_t(ys, ay))
    beta = np.where((xs * ys > 0) | ((xs * ys == 0) & (xs + ys >= 0)), 0.0, 0.5)
    out[rest] = 0.5 * special.ndtr(xs) + 0.5 * special.ndtr(ys) - tx - ty - beta
    return np.clip(out, 0.0, 1.0)


def _gauss_cdf(rho, u, v):
    return _bvn_cdf(special.ndtri(u), special.ndtri(v), rho)


def _gauss_h(rho, u, v):
    x, y = special.ndtri(u), special.ndtri(v)
    return special.ndtr((x - rho * y) / math.sqrt(1.0 - rho * rho))


def _gauss_hinv(rho, w, v):
    z, y = special.ndtri(w), special.ndtri(v)
    return special.ndtr(z * math.sqrt(1.0 - rho * rho) + rho * y)


# --------------------------------------------------------------------------
# Clayton


def _clayton_a(theta, u, v):
    # u^-theta + v^-theta - 2, accurate for small theta
    return np.expm1(-theta * np.log(u)) + np.expm1(-theta * np.log(v))


def _clayton_logpdf(theta, u, v):
    a = _clayton_a(theta, u, v)
    return (math.log1p(theta) - (1.0 + theta) * (np.log(u) + np.log(v))
            - (2.0 + 1.0 / theta) * np.log1p(a))


def _clayton_cdf(theta, u, v):
    return np.exp(-np.log1p(_clayton_a(theta, u, v)) / theta)


def _clayton_h(theta, u, v):
    a = _clayton_a(theta, u, v)
    return np.exp(-(theta + 1.0) * np.log(v) - (1.0 + 1.0 / theta) * np.log1p(a))


def _clayton_hinv(theta, w, v):
    lv = np.log(v)
    t = np.expm1(-theta / (1.0 + theta) * (np.log(w) + (theta + 1.0) * lv))
    t = t - np.expm1(-theta * lv)
    return np.exp(-np.log1p(t) / theta)


# --------------------------------------------------------------------------
# Gumbel


def _gumbel_parts(theta, u, v):
    lx, ly = np.log(-np.log(u)), np.log(-np.log(v))
    big = np.logaddexp(theta * lx, theta * ly)  # log(x^theta + y^theta)
    return lx, ly, big, np.exp(big / theta)


def _gumbel_logpdf(theta, u, v):
    lx, ly, big, a = _gumbel_parts(theta, u, v)
    return (-a - np.log(u) - np.log(v) + (theta - 1.0) * (lx + ly)
            + (1.0 / theta - 2.0) * big + np.log(a + theta - 1.0))


def _gumbel_cdf(theta, u, v):
    return np.exp(-_gumbel_parts(theta, u, v)[3])


def _gumbel_h(theta, u, v):
    lx, ly, big, a = _gumbel_parts(theta, u, v)
    return np.exp(-a + (1.0 / theta - 1.0) * big + (theta - 1.0) * ly - np.log(v))


# --------------------------------------------------------------------------
# Frank


def _frank_logpdf(theta, u, v):
    a, b, g = np.expm1(-theta * u), np.expm1(-theta * v), math.expm1(-theta)
    return (math.log(-theta * g) - theta * (u + v)) - 2.0 * np.log(np.abs(g + a * b))


def _frank_cdf(theta, u, v):
    a, b, g = np.expm1(-theta * u), np.expm1(-theta * v), math.expm1(-theta)
    return -np.log1p(a * b / g) / theta


def _frank_h_lower(theta, u, v):
    a, b, g = np.expm1(-theta * u), np.expm1(-theta * v), math.expm1(-theta)
    return (b + 1.0) * a / (g + a * b)


def _frank_h(theta, u, v):
    # the denominator cancels when u and v are both near 1; reflect there
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = _frank_h_lower(theta, u, v)
        upper = 1.0 - _frank_h_lower(theta, 1.0 - u, 1.0 - v)
    return np.where(u + v > 1.0, upper, lower)


def _frank_hinv(theta, w, v):
    # u = log(den / num) / theta with both terms written as positive sums
    lw, l1w = np.log(w), np.log1p(-w)
    log_num = np.logaddexp(l1w - theta * v, lw - theta)
    log_den = np.logaddexp(lw, l1w - theta * v)
    return (log_den - log_num) / theta


def _debye1(theta):
    if theta == 0.0:
        return 1.0
    val, _ = integrate.quad(lambda t: t / math.expm1(t) if t != 0.0 else 1.0,
                            0.0, theta, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val / theta


def _frank_tau(theta):
    return 1.0 + 4.0 * (_debye1(theta) - 1.0) / theta


# --------------------------------------------------------------------------


def _solve_hinv(h, pdf, w, v, maxiter=200, tol=1e-13):
    """Safeguarded Newton iteration for ``h(u | v) = w`` on (0, 1)."""
    w, v = np.broadcast_arrays(w, v)
    w, v = w.astype(float).ravel(), v.astype(float).ravel()
    lo, hi = np.zeros_like(w), np.ones_like(w)
    u = np.full_like(w, 0.5)
    done = np.zeros(w.shape, dtype=bool)
    for _ in range(maxiter):
        idx = ~done
        if not idx.any():
            break
        uu = u[idx]
        f = h(uu, v[idx]) - w[idx]
        conv = np.abs(f) <= tol
        lo[idx] = np.where(f < 0, uu, lo[idx])
        hi[idx] = np.where(f > 0, uu, hi[idx])
        dens = pdf(uu, v[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = uu - f / dens
        mid = 0.5 * (lo[idx] + hi[idx])
        inside = np.isfinite(step) & (step > lo[idx]) & (step < hi[idx])
        nxt = np.where(inside, step, mid)
        nxt = np.where(conv, uu, nxt)
        # bracket collapsed to machine precision
        tiny = (hi[idx] - lo[idx]) <= 4.0 * np.spacing(np.maximum(hi[idx], 1e-300))
        u[idx] = nxt
        sub = np.flatnonzero(idx)
        done[sub[conv | tiny]] = True
    if not done.all():
        raise ConvergenceError("h-inverse root search did not converge")
    return u


@dataclass(frozen=True)
class BivariateCopula:
    """
    Parametric bivariate copula.

    Parameters
    ----------
    family : Family or str
        One of independence, gaussian, clayton, gumbel, frank.
    parameter : float, optional
        Gaussian correlation in (-1, 1); Clayton theta > 0; Gumbel
        theta >= 1; Frank theta != 0.  Must be omitted for independence.
    """
    family: Family
    parameter: float | None = None

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        p = self.parameter
        if fam is Family.INDEPENDENCE:
            if p is not None:
                raise ParameterError("independence copula takes no parameter")
            return
        if p is None:
            raise ParameterError(f"{fam.value} copula requires a parameter")
        p = float(p)
        object.__setattr__(self, "parameter", p)
        ok = {
            Family.GAUSSIAN: -1.0 < p < 1.0,
            Family.CLAYTON: 0.0 < p < math.inf,
            Family.GUMBEL: 1.0 <= p < math.inf,
            Family.FRANK: p != 0.0 and math.isfinite(p),
        }[fam]
        if not ok:
            raise ParameterError(f"parameter {p} outside the {fam.value} domain")

    @classmethod
    def independence(cls):
        return cls(Family.INDEPENDENCE)

    @property
    def is_independence(self) -> bool:
        return self.family is Family.INDEPENDENCE

    @property
    def n_params(self) -> int:
        return 0 if self.is_independence else 1

    def logpdf(self, u, v):
        u, v = clamp(u), clamp(v)
        p, fam = self.parameter, self.family
        if fam is Family.INDEPENDENCE:
            return np.zeros(np.broadcast(u, v).shape)
        if fam is Family.GAUSSIAN:
            return _gauss_logpdf(p, u, v)
        if fam is Family.CLAYTON:
            return _clayton_logpdf(p, u, v)
        if fam is Family.GUMBEL:
            return _gumbel_logpdf(p, u, v)
        return _frank_logpdf(p, u, v)

    def pdf(self, u, v):
        return np.exp(self.logpdf(u, v))

    def cdf(self, u, v):
        u, v = clamp(u), clamp(v)
        p, fam = self.parameter, self.family
        if fam is Family.INDEPENDENCE:
            return u * v
        if fam is Family.GAUSSIAN:
            return _gauss_cdf(p, u, v)
        if fam is Family.CLAYTON:
            return _clayton_cdf(p, u, v)
        if fam is Family.GUMBEL:
            return _gumbel_cdf(p, u, v)
        return _frank_cdf(p, u, v)

    def h(self, u, v):
        """Conditional distribution of the first argument given the second."""
        u, v = clamp(u), clamp(v)
        p, fam = self.parameter, self.family
        if fam is Family.INDEPENDENCE:
            out = np.broadcast_to(u, np.broadcast(u, v).shape).copy()
        elif fam is Family.GAUSSIAN:
            out = _gauss_h(p, u, v)
        elif fam is Family.CLAYTON:
            out = _clayton_h(p, u, v)
        elif fam is Family.GUMBEL:
            out = _gumbel_h(p, u, v)
        else:
            out = _frank_h(p, u, v)
        return np.clip(out, 0.0, 1.0)

    def h_inverse(self, w, v):
        """Solve ``h(u | v) = w`` for ``u``."""
        w, v = clamp(w), clamp(v)
        p, fam = self.parameter, self.family
        if fam is Family.INDEPENDENCE:
            out = np.broadcast_to(w, np.broadcast(w, v).shape).copy()
        elif fam is Family.GAUSSIAN:
            out = _gauss_hinv(p, w, v)
        elif fam is Family.CLAYTON:
            out = _clayton_hinv(p, w, v)
        elif fam is Family.FRANK:
            out = _frank_hinv(p, w, v)
        else:
            shape = np.broadcast(w, v).shape
            out = _solve_hinv(lambda a, b: _gumbel_h(p, a, b),
                              lambda a, b: np.exp(_gumbel_logpdf(p, a, b)),
                              w, v).reshape(shape)
        return clamp(out)

    def tau(self) -> float:
        return param_to_tau(self)

    def to_dict(self):
        return {"family": self.family.value, "parameter": self.parameter}


# --------------------------------------------------------------------------
# Functional interface


def density(c: BivariateCopula, u, v):
    return c.pdf(u, v)


def cdf(c: BivariateCopula, u, v):
    return c.cdf(u, v)


def h_function(c: BivariateCopula, target_u, given_v):
    return c.h(target_u, given_v)


def h_inverse(c: BivariateCopula, target_w, given_v):
    return c.h_inverse(target_w, given_v)


def param_to_tau(c: BivariateCopula) -> float:
    """Kendall's tau implied by the copula parameter."""
    p, fam = c.parameter, c.family
    if fam is Family.INDEPENDENCE:
        return 0.0
    if fam is Family.GAUSSIAN:
        return 2.0 / math.pi * math.asin(p)
    if fam is Family.CLAYTON:
        return p / (p + 2.0)
    if fam is Family.GUMBEL:
        return 1.0 - 1.0 / p
    return _frank_tau(p)


def tau_to_param(family, tau: float) -> BivariateCopula:
    """Invert :func:`param_to_tau` for ``family``.

    Raises
    ------
    ParameterError
        If ``tau`` cannot be attained by the family.
    """
    fam = Family.parse(family)
    tau = float(tau)
    if fam is Family.INDEPENDENCE:
        return BivariateCopula(fam)
    if not -1.0 < tau < 1.0:
        raise ParameterError(f"tau={tau} is not attainable by any copula family")
    if fam is Family.GAUSSIAN:
        return BivariateCopula(fam, math.sin(math.pi * tau / 2.0))
    if fam in (Family.CLAYTON, Family.GUMBEL):
        unattainable = tau <= 0.0 if fam is Family.CLAYTON else tau < 0.0
        if unattainable:
            raise ParameterError(f"tau={tau} is not attainable by the {fam.value} family")
        if fam is Family.CLAYTON:
            return BivariateCopula(fam, 2.0 * tau / (1.0 - tau))
        return BivariateCopula(fam, 1.0 / (1.0 - tau))
    if tau == 0.0:
        raise ParameterError("tau=0 is not attainable by the frank family")
    # Frank tau is odd and increasing in theta; bracket the root.
    sign = 1.0 if tau > 0 else -1.0
    hi = 1.0
    while _frank_tau(sign * hi) * sign < abs(tau):
        hi *= 2.0
        if hi > 1e6:
            raise ParameterError(f"tau={tau} is too extreme for the frank family")
    theta = optimize.brentq(lambda t: _frank_tau(sign * t) - tau, 1e-12, hi,
                            xtol=1e-14, rtol=1e-15, maxiter=500)
    return BivariateCopula(fam, sign * theta)


def _tau_a_bruteforce(x, y) -> float:
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    n = x.size
    return float(np.sum(np.triu(dx * dy, 1)) / (n * (n - 1) / 2))


def empirical_tau(u, v) -> float:
    """Kendall's tau-a: (concordant - discordant) / (n choose 2)."""
    x, y = np.asarray(u, float), np.asarray(v, float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("tau needs two one-dimensional samples of equal length")
    if x.size < 2:
        raise DataError("tau needs at least two observations")
    if np.unique(x).size == x.size and np.unique(y).size == y.size:
        # Without ties tau-a coincides with scipy's O(n log n) tau-b.
        return float(stats.kendalltau(x, y).statistic)
    return _tau_a_bruteforce(x, y)


def _golden_section(f, lo, hi, tol=1e-6, maxiter=200):
    """Minimise a unimodal ``f`` on ``[lo, hi]``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


_MLE_TAU_HALFWIDTH = 0.15


def fit_bicop(u, v, family, method: str = "itau") -> BivariateCopula:
    """
    Fit a pair copula to pseudo-observations.

    Parameters
    ----------
    u, v : array_like
        Paired observations on (0, 1); at least 10.
    family : Family or str
    method : {"itau", "mle"}
        ``"itau"`` inverts the empirical Kendall tau.  ``"mle"`` refines that
        start by golden-section search of the log-likelihood over the tau
        scale, within +/-0.15 of the start.
    """
    fam = Family.parse(family)
    u, v = np.asarray(u, float), np.asarray(v, float)
    if u.shape != v.shape or u.ndim != 1:
        raise DataError("u and v must be one-dimensional and of equal length")
    if u.size < 10:
        raise DataError(f"at least 10 observations required, got {u.size}")
    if np.ptp(u) == 0.0 or np.ptp(v) == 0.0:
        raise DataError("constant column: Kendall tau is undefined")
    if fam is Family.INDEPENDENCE:
        return BivariateCopula(fam)
    tau = empirical_tau(u, v)
    start = tau_to_param(fam, tau)
    if method == "itau":
        return start
    if method != "mle":
        raise ValueError(f"unknown fitting method {method!r}")

    lo_tau = max(tau - _MLE_TAU_HALFWIDTH, -0.999)
    hi_tau = min(tau + _MLE_TAU_HALFWIDTH, 0.999)
    if fam in (Family.CLAYTON, Family.GUMBEL):
        lo_tau = max(lo_tau, 1e-6)
    if fam is Family.FRANK and lo_tau < 0.0 < hi_tau:
        # Frank excludes tau = 0; stay on the side of the start value.
        lo_tau, hi_tau = (1e-6, hi_tau) if tau > 0 else (lo_tau, -1e-6)

    def nll(t):
        try:
            c = tau_to_param(fam, t)
        except ParameterError:
            return math.inf
        return -float(np.sum(c.logpdf(u, v)))

    best_tau = _golden_section(nll, lo_tau, hi_tau, tol=1e-7)
    best = tau_to_param(fam, best_tau)
    if nll(best_tau) <= nll(tau):
        return best
    return start


def log_likelihood(c: BivariateCopula, u, v) -> float:
    return float(np.sum(c.logpdf(u, v)))


def sample_pairs(c: BivariateCopula, n: int, rng) -> np.ndarray:
    """Draw ``n`` pairs by inverting the h-function."""
    v = rng.random(n)
    w = rng.random(n)
    return np.column_stack([c.h_inverse(w, v), clamp(v)])


__all__ = [
    "EPS", "Family", "BivariateCopula", "density", "cdf", "h_function",
    "h_inverse", "param_to_tau", "tau_to_param", "fit_bicop", "log_likelihood",
    "sample_pairs", "clamp",
]

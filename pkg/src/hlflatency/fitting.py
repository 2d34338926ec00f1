"""Maximum-likelihood fitting of latency samples and best-fit selection.

Fits are computed on raw samples rather than histograms, so the bin width
used for plotting never influences the estimates.

* Exponential: closed form, rate = 1 / mean.
* Gamma: Newton iteration on ``log(a) - digamma(a) = log(mean) - mean(log x)``
  started from the method-of-moments shape.
* GEV: Nelder-Mead on the negative log-likelihood, started from
  probability-weighted-moment estimates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .distributions import FAMILIES, Exponential, Gamma, Gev
from .errors import FitDegenerateError, FitError, FitFailedError, InputError, UndefinedMomentError
from .kstest import ks_critical, ks_statistic
from .special import digamma, gamma_fn, trigamma

logger = logging.getLogger(__name__)

GEV_MIN_SAMPLES = 100
GEV_MAX_EVALS = 2000
GAMMA_TOL = 1e-10
GAMMA_MAX_ITER = 100
TIE_TOLERANCE = 1e-3


@dataclass
class SampleSet:
    """Latency samples (seconds) from one run or a pool of runs."""

    values: np.ndarray
    run_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise InputError(f"sample set {self.run_id!r} is empty")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise InputError(f"sample set {self.run_id!r} must contain finite values > 0")

    @property
    def n(self):
        return int(self.values.size)

    def mean(self):
        return float(np.mean(self.values))


@dataclass(frozen=True)
class FitReport:
    distribution: object
    ks_statistic: float
    ks_critical: float
    passed: bool
    empirical_mean: float
    bestfit_mean: float
    n: int
    log_likelihood: float
    significance: float = 0.01
    criterion: str = "fixed"
    candidates: dict = field(default_factory=dict)

    @property
    def family(self):
        return self.distribution.family


def _as_values(samples):
    if isinstance(samples, SampleSet):
        return samples.values
    return SampleSet(samples).values


def log_likelihood(dist, samples):
    return float(np.sum(dist.logpdf(_as_values(samples))))


def fit_exponential(samples):
    x = _as_values(samples)
    return Exponential(1.0 / float(np.mean(x)))


def gamma_moments(samples):
    """Method-of-moments Gamma estimate (also the MLE starting point)."""
    x = _as_values(samples)
    m = float(np.mean(x))
    var = float(np.var(x))
    if var <= 0.0 or var <= (m * 1e-14) ** 2:
        raise FitDegenerateError("zero sample variance; gamma shape diverges")
    alpha = m * m / var
    return Gamma(alpha, alpha / m)


def fit_gamma(samples):
    x = _as_values(samples)
    start = gamma_moments(x)
    m = float(np.mean(x))
    s = math.log(m) - float(np.mean(np.log(x)))
    if s <= 0.0:
        raise FitDegenerateError("log-mean gap is zero; gamma shape diverges")
    a = start.alpha
    for _ in range(GAMMA_MAX_ITER):
        f = math.log(a) - digamma(a) - s
        step = f / (1.0 / a - trigamma(a))
        new = a - step
        while new <= 0.0:
            # keep the iterate positive
            step *= 0.5
            new = a - step
        a = new
        if abs(step) < GAMMA_TOL:
            break
    return Gamma(a, a / m)


def gev_pwm(samples):
    """Probability-weighted-moment (L-moment) GEV estimate, Hosking's recipe."""
    x = np.sort(_as_values(samples))
    n = x.size
    j = np.arange(n)
    b0 = x.mean()
    b1 = np.sum(j / (n - 1) * x) / n
    b2 = np.sum(j * (j - 1) / ((n - 1) * (n - 2)) * x) / n
    l2 = 2.0 * b1 - b0
    if l2 <= 0:
        raise FitDegenerateError("zero L-scale; GEV scale collapses")
    c = l2 / (3.0 * b2 - b0) - math.log(2.0) / math.log(3.0)
    k = 7.8590 * c + 2.9554 * c * c  # Hosking's k = -xi
    k = min(max(k, -0.95), 5.0)
    if abs(k) < 1e-6:
        sigma = l2 / math.log(2.0)
        mu = b0 - 0.5772156649015329 * sigma
    else:
        g = gamma_fn(1.0 + k)
        sigma = l2 * k / (g * (1.0 - 2.0 ** (-k)))
        mu = b0 - sigma * (1.0 - g) / k
    return Gev(-k, sigma, mu)


def _gev_nll(theta, x):
    xi, log_sigma, mu = theta
    sigma = math.exp(log_sigma)
    z = (x - mu) / sigma
    if abs(xi) < 1e-9:
        return float(x.size * log_sigma + np.sum(z + np.exp(-z)))
    arg = xi * z
    if np.min(arg) <= -1.0:
        return math.inf
    log1p = np.log1p(arg)
    log_t = -log1p / xi
    return float(x.size * log_sigma + np.sum((1.0 + 1.0 / xi) * log1p + np.exp(log_t)))


def fit_gev(samples, max_evals=GEV_MAX_EVALS):
    x = _as_values(samples)
    if x.size < GEV_MIN_SAMPLES:
        raise InputError(f"GEV fit needs at least {GEV_MIN_SAMPLES} samples, got {x.size}")
    start = gev_pwm(x)
    theta0 = np.array([start.xi, math.log(start.sigma), start.mu])
    if not math.isfinite(_gev_nll(theta0, x)):
        # PWM start can leave a few points outside the support; widen scale
        for widen in (1.5, 2.0, 4.0, 8.0):
            trial = np.array([start.xi, math.log(start.sigma * widen), start.mu])
            if math.isfinite(_gev_nll(trial, x)):
                theta0 = trial
                break
        else:
            theta0 = np.array([0.0, math.log(start.sigma), start.mu])
    scale = max(float(np.std(x)), 1e-12)
    res = minimize(
        _gev_nll,
        theta0,
        args=(x,),
        method="Nelder-Mead",
        options={
            "maxfev": max_evals,
            "xatol": 1e-7 * scale,
            "fatol": 1e-9,
            "initial_simplex": [
                theta0,
                theta0 + [0.05, 0.0, 0.0],
                theta0 + [0.0, 0.1, 0.0],
                theta0 + [0.0, 0.0, 0.1 * scale],
            ],
        },
    )
    xi, log_sigma, mu = res.x
    best = Gev(float(xi), math.exp(log_sigma), float(mu))
    if not res.success or not math.isfinite(res.fun):
        raise FitFailedError(f"GEV simplex did not converge: {res.message}", best=best)
    return best


FITTERS = {
    "exp": fit_exponential,
    "gamma": fit_gamma,
    "gev": fit_gev,
}


def fit(samples, family):
    try:
        fitter = FITTERS[family]
    except KeyError:
        raise InputError(f"unknown family {family!r}; expected one of {sorted(FITTERS)}") from None
    return fitter(samples)


def model_mean(dist):
    """Mean of ``dist``, or NaN when it is undefined (heavy-tailed GEV)."""
    try:
        return float(dist.mean())
    except UndefinedMomentError:
        return math.nan


def make_report(samples, dist, significance=0.01, criterion="fixed", candidates=None):
    x = _as_values(samples)
    stat = ks_statistic(x, dist)
    crit = ks_critical(x.size, significance)
    return FitReport(
        distribution=dist,
        ks_statistic=stat,
        ks_critical=crit,
        passed=stat < crit,
        empirical_mean=float(np.mean(x)),
        bestfit_mean=model_mean(dist),
        n=int(x.size),
        log_likelihood=log_likelihood(dist, x),
        significance=significance,
        criterion=criterion,
        candidates=dict(candidates or {}),
    )


def fit_report(samples, family, significance=0.01):
    return make_report(samples, fit(samples, family), significance)


def select_best_fit(samples, candidates=("exp", "gamma", "gev"), significance=0.01,
                    tie_tolerance=TIE_TOLERANCE):
    """Fit every candidate family and report the one with the smallest KS distance.

    When several families are within ``tie_tolerance`` of the smallest
    statistic, the one with fewer parameters wins.
    """
    if not candidates:
        raise InputError("at least one candidate family is required")
    x = _as_values(samples)
    fitted = {}
    errors = {}
    for family in candidates:
        try:
            dist = fit(x, family)
            fitted[family] = (dist, ks_statistic(x, dist))
        except FitError as exc:
            errors[family] = exc
            logger.debug("candidate %s failed: %s", family, exc)
        except InputError as exc:
            errors[family] = exc
    if not fitted:
        raise FitFailedError(
            "all candidate fits failed: " + "; ".join(f"{k}: {v}" for k, v in errors.items())
        )
    best_stat = min(stat for _, stat in fitted.values())
    close = [f for f, (_, stat) in fitted.items() if stat <= best_stat + tie_tolerance]
    chosen = min(close, key=lambda f: (FAMILIES[f].n_params, fitted[f][1]))
    return make_report(
        x,
        fitted[chosen][0],
        significance,
        criterion="min-ks",
        candidates={f: stat for f, (_, stat) in fitted.items()},
    )


@dataclass(frozen=True)
class Exclusion:
    run_id: str
    run_mean: float
    threshold: float


def filter_outlier_runs(runs, k=5.0):
    """Drop runs whose mean latency exceeds median + k * MAD of the run means.

    Returns ``(kept, excluded)`` where ``excluded`` is a list of
    :class:`Exclusion` records.  Fewer than three runs are returned unchanged.
    When the MAD is zero the mean absolute deviation from the median is used
    instead, so identical-but-one runs are not all flagged.
    """
    runs = list(runs)
    if len(runs) < 3:
        return runs, []
    means = np.array([np.mean(getattr(r, "values", r)) for r in runs])
    med = float(np.median(means))
    spread = float(np.median(np.abs(means - med)))
    if spread == 0.0:
        spread = float(np.mean(np.abs(means - med)))
    threshold = med + k * spread
    kept, excluded = [], []
    for run, m in zip(runs, means):
        if m > threshold:
            excluded.append(Exclusion(getattr(run, "run_id", ""), float(m), threshold))
        else:
            kept.append(run)
    return kept, excluded

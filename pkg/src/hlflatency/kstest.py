"""One-sample Kolmogorov-Smirnov goodness-of-fit test.

Critical values come from the asymptotic Kolmogorov distribution,
``c(alpha) / sqrt(n)``.  Fitted parameters are treated as known (no
Lilliefors-style correction), so tests against a model fitted to the same
data are somewhat conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InputError, ParameterError


@dataclass(frozen=True)
class KsResult:
    statistic: float
    critical_value: float
    significance: float
    n: int
    passed: bool


def _values(samples):
    values = getattr(samples, "values", samples)
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("sample set is empty")
    if np.isnan(arr).any():
        raise InputError("sample set contains NaN")
    return arr


class EmpiricalCdf:
    """Right-continuous step function F_n(x) = #{samples <= x} / n."""

    def __init__(self, samples):
        self.sorted = np.sort(_values(samples), kind="stable")
        self.n = self.sorted.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sorted, x, side="right") / self.n
        return float(out) if out.ndim == 0 else out

    def table(self):
        """Sorted (x, i/n) pairs."""
        return self.sorted.copy(), np.arange(1, self.n + 1) / self.n


def empirical_cdf(samples):
    return EmpiricalCdf(samples)


def ks_statistic(samples, dist):
    """Sup-distance between the empirical CDF of ``samples`` and ``dist.cdf``.

    Both envelopes of each step are checked, i.e. ``i/n - F(x_i)`` and
    ``F(x_i) - (i-1)/n`` over the stably sorted sample.
    """
    x = np.sort(_values(samples), kind="stable")
    n = x.size
    f = np.asarray(dist.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


def kolmogorov_sf(c, terms=100):
    """P(K > c) for the limiting Kolmogorov distribution."""
    if c <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    total = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * c * c))
    return float(min(1.0, max(0.0, total)))


def kolmogorov_quantile(significance):
    """c such that P(K > c) = significance."""
    if not 0.0 < significance < 1.0:
        raise ParameterError(f"significance must be in (0, 1), got {significance!r}")
    return brentq(lambda c: kolmogorov_sf(c) - significance, 0.2, 10.0, xtol=1e-14)


def ks_critical(n, significance=0.01):
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n!r}")
    return kolmogorov_quantile(significance) / math.sqrt(n)


def ks_test(samples, dist, significance=0.01):
    x = _values(samples)
    stat = ks_statistic(x, dist)
    crit = ks_critical(x.size, significance)
    return KsResult(
        statistic=stat,
        critical_value=crit,
        significance=significance,
        n=int(x.size),
        passed=stat < crit,
    )

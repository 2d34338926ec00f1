"""Exponential, Gamma and GEV latency distributions.

Each family is a small frozen dataclass exposing ``pdf``, ``cdf``, ``mean``,
``logpdf`` and ``sample``.  ``pdf``/``cdf`` accept scalars or arrays and never
raise for points outside the support: the density is 0 there and the CDF is
clamped to 0 or 1, because the fitting optimizers routinely probe those
regions.  ``Constant`` is a point mass used by the simulator for stages that
should take a fixed (possibly zero) time; it is not a fitting family.

Samplers draw from a ``numpy.random.Generator`` that the caller owns.
Exponential and GEV use inverse-CDF transforms of uniforms; Gamma uses the
Marsaglia-Tsang squeeze method with the ``u**(1/alpha)`` boost for
``alpha < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from .errors import ParameterError, UndefinedMomentError
from .special import EULER_GAMMA, gamma_1m_excess, log_gamma, regularized_lower_gamma

# below this |xi| the GEV is evaluated with the Gumbel formulas
# Only subnormal-scale shapes fall back to the Gumbel form; log1p/expm1 keep the
# general formulas exact for every other nonzero xi.
GEV_GUMBEL_THRESHOLD = 1e-300


def _finite_positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be a finite number > 0, got {value!r}")


def _wrap(arr, scalar_input):
    return float(arr) if scalar_input else arr


def _uniform_open(rng, size):
    # (0, 1]: never produces log(0)
    return 1.0 - rng.random(size)


@dataclass(frozen=True)
class Exponential:
    lam: float

    family: ClassVar[str] = "exp"
    n_params: ClassVar[int] = 1

    def __post_init__(self):
        _finite_positive("lam", self.lam)

    @property
    def params(self):
        return {"lam": self.lam}

    def support(self):
        return 0.0, math.inf

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            out = np.where(x >= 0.0, math.log(self.lam) - self.lam * x, -np.inf)
        return _wrap(out, x.ndim == 0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0.0, self.lam * np.exp(-self.lam * np.maximum(x, 0.0)), 0.0)
        return _wrap(out, x.ndim == 0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0.0, -np.expm1(-self.lam * np.maximum(x, 0.0)), 0.0)
        return _wrap(out, x.ndim == 0)

    def mean(self):
        return 1.0 / self.lam

    def sample(self, rng, size=None):
        out = -np.log(_uniform_open(rng, size)) / self.lam
        return out if size is not None else float(out)


@dataclass(frozen=True)
class Gamma:
    """Gamma with shape ``alpha`` and rate (inverse scale) ``beta``."""

    alpha: float
    beta: float

    family: ClassVar[str] = "gamma"
    n_params: ClassVar[int] = 2

    def __post_init__(self):
        _finite_positive("alpha", self.alpha)
        _finite_positive("beta", self.beta)

    @property
    def params(self):
        return {"alpha": self.alpha, "beta": self.beta}

    def support(self):
        return 0.0, math.inf

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.alpha, self.beta
        norm = a * math.log(b) - log_gamma(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(x > 0.0, x, 1.0)
            inside = norm + (a - 1.0) * np.log(safe) - b * safe
            if a == 1.0:
                at_zero = norm
            elif a < 1.0:
                at_zero = np.inf
            else:
                at_zero = -np.inf
            out = np.where(x > 0.0, inside, np.where(x == 0.0, at_zero, -np.inf))
        return _wrap(out, x.ndim == 0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(np.asarray(self.logpdf(x)))
        return _wrap(out, x.ndim == 0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = regularized_lower_gamma(self.alpha, np.maximum(self.beta * x, 0.0))
        return _wrap(np.asarray(out), x.ndim == 0)

    def mean(self):
        return self.alpha / self.beta

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        if self.alpha < 1.0:
            boost = _uniform_open(rng, n) ** (1.0 / self.alpha)
            draws = _marsaglia_tsang(self.alpha + 1.0, n, rng) * boost
        else:
            draws = _marsaglia_tsang(self.alpha, n, rng)
        draws = draws / self.beta
        if size is None:
            return float(draws[0])
        return draws.reshape(size)


def _marsaglia_tsang(alpha, n, rng):
    """Unit-rate gamma variates for alpha >= 1, vectorized rejection."""
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(16, int((n - filled) * 1.1))
        z = rng.standard_normal(m)
        u = _uniform_open(rng, m)
        v = 1.0 + c * z
        ok = v > 0.0
        v3 = np.where(ok, v * v * v, 1.0)
        squeeze = u < 1.0 - 0.0331 * z**4
        with np.errstate(divide="ignore", invalid="ignore"):
            full = np.log(u) < 0.5 * z * z + d * (1.0 - v3 + np.log(v3))
        accept = ok & (squeeze | full)
        take = d * v3[accept][: n - filled]
        out[filled: filled + take.size] = take
        filled += take.size
    return out


@dataclass(frozen=True)
class Gev:
    """Generalized extreme value with shape ``xi``, scale ``sigma``, location ``mu``.

    ``xi > 0`` is the Frechet type with lower bound ``mu - sigma/xi``, ``xi < 0``
    the reversed-Weibull type with upper bound ``mu - sigma/xi``, and
    ``|xi| < GEV_GUMBEL_THRESHOLD`` is treated as Gumbel.
    """

    xi: float
    sigma: float
    mu: float

    family: ClassVar[str] = "gev"
    n_params: ClassVar[int] = 3

    def __post_init__(self):
        _finite_positive("sigma", self.sigma)
        for name in ("xi", "mu"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value)):
                raise ParameterError(f"{name} must be finite, got {value!r}")

    @property
    def params(self):
        return {"xi": self.xi, "sigma": self.sigma, "mu": self.mu}

    @property
    def is_gumbel(self):
        return abs(self.xi) < GEV_GUMBEL_THRESHOLD

    def support(self):
        if self.is_gumbel:
            return -math.inf, math.inf
        bound = self.mu - self.sigma / self.xi
        return (bound, math.inf) if self.xi > 0 else (-math.inf, bound)

    def _log_t(self, x):
        """log of t(x) = (1 + xi z)^(-1/xi) (or exp(-z)); nan outside support."""
        z = (x - self.mu) / self.sigma
        if self.is_gumbel:
            return -z
        arg = self.xi * z
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -np.log1p(arg) / self.xi
        return np.where(arg > -1.0, out, np.nan)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        log_t = self._log_t(x)
        with np.errstate(over="ignore", invalid="ignore"):
            out = -math.log(self.sigma) + (self.xi + 1.0) * log_t - np.exp(log_t)
        out = np.where(np.isnan(log_t), -np.inf, out)
        out = np.where(np.isnan(out), -np.inf, out)
        return _wrap(out, x.ndim == 0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(np.asarray(self.logpdf(x)))
        return _wrap(out, x.ndim == 0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        log_t = self._log_t(x)
        with np.errstate(over="ignore"):
            inside = np.exp(-np.exp(log_t))
        below = 0.0 if self.xi > 0 else 1.0
        out = np.where(np.isnan(log_t), below, inside)
        return _wrap(out, x.ndim == 0)

    def mean(self):
        if self.xi >= 1.0:
            raise UndefinedMomentError(f"GEV mean is undefined for xi >= 1 (xi={self.xi})")
        if self.is_gumbel:
            return self.mu + self.sigma * EULER_GAMMA
        return self.mu + self.sigma * gamma_1m_excess(self.xi)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        y = -np.log(p)
        if self.is_gumbel:
            out = self.mu - self.sigma * np.log(y)
        else:
            # expm1 keeps full precision when xi is tiny but not exactly zero
            out = self.mu + self.sigma * np.expm1(-self.xi * np.log(y)) / self.xi
        return _wrap(out, p.ndim == 0)

    def sample(self, rng, size=None):
        u = _uniform_open(rng, size)
        # u == 1 maps to the lower bound / -inf; nudge inside
        u = np.minimum(u, 1.0 - 1e-16)
        out = self.quantile(u)
        return out if size is not None else float(out)


@dataclass(frozen=True)
class Constant:
    """Point mass at ``value``; for deterministic simulator stages."""

    value: float = 0.0

    family: ClassVar[str] = "const"
    n_params: ClassVar[int] = 1

    def __post_init__(self):
        if not (isinstance(self.value, (int, float)) and math.isfinite(self.value) and self.value >= 0):
            raise ParameterError(f"value must be finite and >= 0, got {self.value!r}")

    @property
    def params(self):
        return {"value": self.value}

    def mean(self):
        return float(self.value)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _wrap(np.where(x >= self.value, 1.0, 0.0), x.ndim == 0)

    def sample(self, rng, size=None):
        return np.full(size, float(self.value)) if size is not None else float(self.value)


Distribution = Union[Exponential, Gamma, Gev]
ServiceModel = Union[Exponential, Gamma, Gev, Constant]

FAMILIES = {cls.family: cls for cls in (Exponential, Gamma, Gev)}
SERVICE_FAMILIES = {**FAMILIES, Constant.family: Constant}


def pdf(d, x):
    return d.pdf(x)


def cdf(d, x):
    return d.cdf(x)


def mean(d):
    return d.mean()


def sample(d, rng, size=None):
    return d.sample(rng, size)


def from_spec(family, params):
    """Build a distribution from a family name and parameter mapping."""
    try:
        cls = SERVICE_FAMILIES[family]
    except KeyError:
        raise ParameterError(f"unknown distribution family {family!r}") from None
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad parameters for {family}: {exc}") from None


def parse_dist(text):
    """Parse ``'gamma:alpha=2,beta=3'`` (or positional ``'gamma:2,3'``)."""
    family, _, rest = text.partition(":")
    family = family.strip().lower()
    cls = SERVICE_FAMILIES.get(family)
    if cls is None:
        raise ParameterError(f"unknown distribution family {family!r}")
    names = [f for f in cls.__dataclass_fields__]
    params = {}
    for i, item in enumerate(p for p in rest.split(",") if p.strip()):
        key, sep, value = item.partition("=")
        if sep:
            params[key.strip()] = value
        else:
            if i >= len(names):
                raise ParameterError(f"too many parameters for {family}")
            params[names[i]] = key
    return from_spec(family, params)


def to_spec(d):
    return {"family": d.family, "params": dict(d.params)}

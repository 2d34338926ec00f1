"""Parameter sweeps over (lambda_t, block_size, block_timeout).

For every grid point the harness runs ``runs_per_point`` seeded simulations,
drops outlier runs, and fits each latency type:

* endorse  -> Exponential
* order    -> Gamma
* validate -> GEV
* total    -> Gamma

Each surviving run is fitted and KS-tested on its own; the reported
parameters and KS statistic of a point are arithmetic means over those runs.
Pooled samples (all surviving runs together) feed the empirical mean, a
pooled fit and a minimum-KS best-fit cross-check.  A regime verdict flags
operating points where distribution fitting is known to break down.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .distributions import FAMILIES
from .errors import ConfigError, HlfLatencyError, InputError
from .fitting import (
    FitReport,
    SampleSet,
    filter_outlier_runs,
    fit,
    make_report,
    model_mean,
    select_best_fit,
)
from .kstest import empirical_cdf, ks_critical
from .simulator import CutReason, SimConfig, simulate

logger = logging.getLogger(__name__)

LATENCY_KINDS = ("endorse", "order", "validate", "total")
LATENCY_FAMILIES = {"endorse": "exp", "order": "gamma", "validate": "gev", "total": "gamma"}
THREADS_ENV = "HLL_THREADS"


@dataclass(frozen=True)
class RegimeThresholds:
    timeout_fraction: float = 0.95
    tail_fraction: float = 0.01
    size_fraction: float = 0.95
    tail_sigmas: float = 4.0

    def validate(self):
        for name in ("timeout_fraction", "tail_fraction", "size_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"must be in [0, 1], got {value!r}", field=f"regime.{name}")
        if not self.tail_sigmas > 0:
            raise ConfigError(f"must be > 0, got {self.tail_sigmas!r}", field="regime.tail_sigmas")
        return self


class Regime(str, Enum):
    FEASIBLE = "Feasible"
    TIMEOUT_DOMINANT = "TimeoutDominant"
    SIZE_DOMINANT = "SizeDominant"


@dataclass(frozen=True)
class RegimeVerdict:
    label: Regime
    timeout_cut_fraction: float
    size_cut_fraction: float
    tail_fraction: float
    thresholds: RegimeThresholds


def detect_regime(blocks, samples, thresholds=None):
    """Classify an operating point from its blocks and total latencies.

    ``samples`` may be LatencySample records or a plain array of total
    latencies.  TimeoutDominant wins when at least ``timeout_fraction`` of the
    blocks were cut by the timer; SizeDominant needs both a heavy tail
    (``P(total > mean + tail_sigmas * std) >= tail_fraction``) and at least
    ``size_fraction`` size-cut blocks.
    """
    th = thresholds or RegimeThresholds()
    blocks = list(blocks)
    if not blocks:
        raise InputError("regime detection needs at least one block")
    if len(samples) and hasattr(samples[0], "total_latency"):
        totals = np.array([s.total_latency for s in samples], dtype=float)
    else:
        totals = np.asarray(samples, dtype=float).ravel()
    if totals.size == 0:
        raise InputError("regime detection needs at least one latency sample")
    reasons = [getattr(b, "cut_reason", b) for b in blocks]
    timeout_frac = sum(CutReason(r) is CutReason.TIMEOUT for r in reasons) / len(reasons)
    size_frac = 1.0 - timeout_frac
    tail = float(np.mean(totals > totals.mean() + th.tail_sigmas * totals.std()))
    if timeout_frac >= th.timeout_fraction:
        label = Regime.TIMEOUT_DOMINANT
    elif tail >= th.tail_fraction and size_frac >= th.size_fraction:
        label = Regime.SIZE_DOMINANT
    else:
        label = Regime.FEASIBLE
    return RegimeVerdict(label, timeout_frac, size_frac, tail, th)


@dataclass(frozen=True)
class Histogram:
    """Fixed-width histogram normalised as probability per unit width."""

    bin_width: float
    edges: np.ndarray  # lower edges
    counts: np.ndarray

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def density(self):
        return self.counts / (self.n * self.bin_width)

    @property
    def bins(self):
        return list(zip(self.edges.tolist(), self.counts.tolist()))


def make_histogram(samples, bin_width):
    x = np.asarray(getattr(samples, "values", samples), dtype=float).ravel()
    if x.size == 0:
        raise InputError("cannot build a histogram from no samples")
    if not (math.isfinite(bin_width) and bin_width > 0):
        raise InputError(f"bin width must be > 0, got {bin_width!r}")
    if not np.all(np.isfinite(x)):
        raise InputError("histogram samples must be finite")
    first = math.floor(x.min() / bin_width)
    idx = np.floor(x / bin_width).astype(np.int64) - first
    counts = np.bincount(idx)
    edges = (first + np.arange(counts.size)) * bin_width
    return Histogram(float(bin_width), edges, counts)


def make_cdf(samples):
    """Empirical CDF table: sorted sample values and i/n."""
    return empirical_cdf(getattr(samples, "values", samples)).table()


@dataclass(frozen=True)
class SweepSpec:
    lambda_t: tuple
    block_size: tuple
    block_timeout: tuple
    base: SimConfig
    runs_per_point: int = 10
    significance: float = 0.01
    outlier_k: float = 5.0
    thresholds: RegimeThresholds = RegimeThresholds()
    # same seeds at every grid point (common random numbers) instead of per-point seeds
    paired_seeds: bool = False

    def __post_init__(self):
        for name in ("lambda_t", "block_size", "block_timeout"):
            value = getattr(self, name)
            if isinstance(value, (int, float)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))

    @classmethod
    def single(cls, cfg, **kw):
        return cls((cfg.lambda_t,), (cfg.block_size,), (cfg.block_timeout,), cfg, **kw)

    def points(self):
        """Grid points in lexicographic (lambda_t, block_size, block_timeout) order."""
        return sorted(set(itertools.product(self.lambda_t, self.block_size, self.block_timeout)))

    def validate(self):
        for name in ("lambda_t", "block_size", "block_timeout"):
            if not getattr(self, name):
                raise ConfigError("grid axis must not be empty", field=name)
        if isinstance(self.runs_per_point, bool) or not isinstance(self.runs_per_point, int) \
                or self.runs_per_point < 1:
            raise ConfigError(f"must be an integer >= 1, got {self.runs_per_point!r}", field="runs_per_point")
        if not 0.0 < self.significance < 1.0:
            raise ConfigError(f"must be in (0, 1), got {self.significance!r}", field="significance")
        if not self.outlier_k > 0:
            raise ConfigError(f"must be > 0, got {self.outlier_k!r}", field="outlier_k")
        self.thresholds.validate()
        for point in self.points():
            self.config_for(point).validate()
        return self

    def config_for(self, point, seed=None):
        lam, size, timeout = point
        extra = {} if seed is None else {"seed": seed}
        return self.base.with_point(lam, size, timeout, **extra)


def derive_seed(base_seed, point, run_index):
    """Stable 63-bit seed from the base seed, grid coordinates and run index.

    ``point=None`` gives a seed that depends only on the run index, so every
    grid point sees the same random streams.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", int(base_seed)))
    if point is not None:
        lam, size, timeout = point
        h.update(struct.pack("<dqd", float(lam), int(size), float(timeout)))
    h.update(struct.pack("<Q", int(run_index)))
    return int.from_bytes(h.digest(), "little") >> 1


def run_id_for(point, run_index):
    lam, size, timeout = point
    return f"l{lam:g}-s{size}-t{timeout:g}-r{run_index:02d}"


@dataclass
class LatencyFit:
    """Fit results of one latency type at one grid point."""

    kind: str
    family: str
    report: FitReport  # parameters and KS statistic averaged over runs
    run_reports: list
    pooled: Optional[FitReport] = None
    best: Optional[FitReport] = None

    @property
    def passed_runs(self):
        return sum(r.passed for r in self.run_reports)


@dataclass
class PointSummary:
    point: tuple
    seeds: list
    runs_used: int
    excluded: list
    means: dict
    fits: dict
    regime: Optional[RegimeVerdict]
    errors: list = field(default_factory=list)
    runs: list = field(default_factory=list)  # SimResult objects when kept

    @property
    def ok(self):
        return not self.errors


def _averaged_report(family, run_reports, pooled_values, significance):
    cls = FAMILIES[family]
    params = {k: float(np.mean([r.distribution.params[k] for r in run_reports]))
              for k in run_reports[0].distribution.params}
    dist = cls(**params)
    stat = float(np.mean([r.ks_statistic for r in run_reports]))
    n = int(round(np.mean([r.n for r in run_reports])))
    crit = ks_critical(n, significance)
    return FitReport(
        distribution=dist,
        ks_statistic=stat,
        ks_critical=crit,
        passed=stat < crit,
        empirical_mean=float(np.mean(pooled_values)),
        bestfit_mean=model_mean(dist),
        n=n,
        log_likelihood=float(np.mean([r.log_likelihood for r in run_reports])),
        significance=significance,
        criterion="run-average",
    )


def _fit_kind(kind, family, run_values, significance, errors):
    run_reports = []
    for run_id, values in run_values:
        try:
            samples = SampleSet(values, run_id)
            run_reports.append(make_report(samples, fit(samples, family), significance))
        except HlfLatencyError as exc:
            errors.append(f"{kind} fit of {run_id}: {exc}")
    pooled_values = np.concatenate([v for _, v in run_values])
    if not run_reports:
        return None
    result = LatencyFit(kind, family, _averaged_report(family, run_reports, pooled_values, significance),
                        run_reports)
    try:
        pooled = SampleSet(pooled_values, "pooled")
        result.pooled = make_report(pooled, fit(pooled, family), significance)
        result.best = select_best_fit(pooled, significance=significance)
    except HlfLatencyError as exc:
        errors.append(f"{kind} pooled fit: {exc}")
    return result


def _simulate_task(args):
    cfg, run_id = args
    return simulate(cfg, run_id)


def summarize_point(point, results, spec, seeds=(), keep_runs=False):
    """Aggregate the simulation results of one grid point."""
    errors = []
    by_id = {r.run_id: r for r in results}
    kept, excluded = filter_outlier_runs(
        [SampleSet(r.total_latency, r.run_id) for r in results], k=spec.outlier_k)
    kept_runs = [by_id[s.run_id] for s in kept]
    for ex in excluded:
        logger.info("point %s: excluded run %s (mean %.4g > %.4g)", point, ex.run_id, ex.run_mean, ex.threshold)
    means = {kind: float(np.mean(np.concatenate([r.latencies(kind) for r in kept_runs])))
             for kind in LATENCY_KINDS}
    fits = {}
    for kind in LATENCY_KINDS:
        run_values = [(r.run_id, r.latencies(kind)) for r in kept_runs]
        res = _fit_kind(kind, LATENCY_FAMILIES[kind], run_values, spec.significance, errors)
        if res is not None:
            fits[kind] = res
    blocks = [b for r in kept_runs for b in r.blocks]
    totals = np.concatenate([r.total_latency for r in kept_runs])
    regime = detect_regime(blocks, totals, spec.thresholds)
    return PointSummary(
        point=point,
        seeds=list(seeds),
        runs_used=len(kept_runs),
        excluded=excluded,
        means=means,
        fits=fits,
        regime=regime,
        errors=errors,
        runs=list(results) if keep_runs else [],
    )


def _failed_point(point, seeds, exc, stage="simulation"):
    return PointSummary(point, list(seeds), 0, [], {}, {}, None, [f"{stage}: {exc}"])


def worker_count(requested=None):
    """Worker processes to use: ``requested``, capped by HLL_THREADS and the CPU count."""
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"must be a positive integer, got {cap!r}", field=THREADS_ENV) from None
    return max(1, n)


def _tasks(spec, point):
    out = []
    for run in range(spec.runs_per_point):
        seed = derive_seed(spec.base.seed, None if spec.paired_seeds else point, run)
        out.append((spec.config_for(point, seed), run_id_for(point, run)))
    return out


def run_experiment(point, spec, keep_runs=False):
    """Simulate and summarise one grid point (serially)."""
    spec.validate()
    tasks = _tasks(spec, point)
    seeds = [cfg.seed for cfg, _ in tasks]
    try:
        results = [_simulate_task(t) for t in tasks]
    except HlfLatencyError as exc:
        return _failed_point(point, seeds, exc)
    return summarize_point(point, results, spec, seeds, keep_runs)


def sweep(spec, workers=None, keep_runs=False):
    """Evaluate every grid point; summaries come back in grid order.

    Simulations are spread over a process pool (capped by ``HLL_THREADS``);
    aggregation is a fold in grid order so the output does not depend on
    completion order.
    """
    spec.validate()
    points = spec.points()
    tasks = {p: _tasks(spec, p) for p in points}
    flat = [t for p in points for t in tasks[p]]
    n_workers = min(worker_count(workers), len(flat))
    results = {}
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_simulate_task, t) for t in flat]
            for (cfg, run_id), fut in zip(flat, futures):
                try:
                    results[run_id] = fut.result()
                except HlfLatencyError as exc:
                    results[run_id] = exc
    else:
        for t in flat:
            try:
                results[t[1]] = _simulate_task(t)
            except HlfLatencyError as exc:
                results[t[1]] = exc
    summaries = []
    for p in points:
        seeds = [cfg.seed for cfg, _ in tasks[p]]
        outcome = [results[run_id] for _, run_id in tasks[p]]
        failure = next((r for r in outcome if isinstance(r, Exception)), None)
        if failure is not None:
            summaries.append(_failed_point(p, seeds, failure))
            continue
        try:
            summaries.append(summarize_point(p, outcome, spec, seeds, keep_runs))
        except HlfLatencyError as exc:
            summaries.append(_failed_point(p, seeds, exc, "aggregation"))
    return summaries


def with_grid(spec, **axes):
    """Copy of ``spec`` with some grid axes replaced."""
    return replace(spec, **axes)

"""Latency modelling for a three-phase (endorse, order, validate) blockchain pipeline.

Discrete-event simulation of the transaction flow, maximum-likelihood fitting
of Exponential, Gamma and GEV latency models, Kolmogorov-Smirnov validation,
and parameter sweeps with regime detection.
"""

from .distributions import Constant, Exponential, Gamma, Gev, parse_dist
from .errors import (
    ConfigError,
    FitDegenerateError,
    FitError,
    FitFailedError,
    HlfLatencyError,
    InputError,
    ParameterError,
    UndefinedMomentError,
)
from .fitting import FitReport, SampleSet, filter_outlier_runs, fit, select_best_fit
from .harness import (
    Histogram,
    Regime,
    RegimeThresholds,
    RegimeVerdict,
    SweepSpec,
    detect_regime,
    make_cdf,
    make_histogram,
    run_experiment,
    sweep,
)
from .kstest import KsResult, ks_critical, ks_statistic, ks_test
from .simulator import BlockRecord, CutReason, LatencySample, SimConfig, run_simulation, simulate

__version__ = "0.1.0"

__all__ = [
    "BlockRecord",
    "ConfigError",
    "Constant",
    "CutReason",
    "detect_regime",
    "Exponential",
    "filter_outlier_runs",
    "fit",
    "FitDegenerateError",
    "FitError",
    "FitFailedError",
    "FitReport",
    "Gamma",
    "Gev",
    "Histogram",
    "HlfLatencyError",
    "InputError",
    "ks_critical",
    "ks_statistic",
    "ks_test",
    "KsResult",
    "LatencySample",
    "make_cdf",
    "make_histogram",
    "ParameterError",
    "parse_dist",
    "Regime",
    "RegimeThresholds",
    "RegimeVerdict",
    "run_experiment",
    "run_simulation",
    "SampleSet",
    "select_best_fit",
    "SimConfig",
    "simulate",
    "sweep",
    "SweepSpec",
    "UndefinedMomentError",
]

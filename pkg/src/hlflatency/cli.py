"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or fit
failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import report
from .config import load_sweep
from .distributions import parse_dist
from .errors import ConfigError, FitError, HlfLatencyError, InputError, ParameterError
from .fitting import SampleSet, fit_report, select_best_fit
from .harness import LATENCY_KINDS, run_experiment, sweep
from .kstest import ks_test

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

logger = logging.getLogger("hlflatency")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; our contract reserves 2 for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="hlflatency", description="Fabric transaction latency simulator and fitting tools.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="simulate one operating point and write samples and fits")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--bin-width", type=float, default=0.05, help="histogram bin width in seconds")
    s.add_argument("--stamp", action="store_true", help="record the wall-clock time in manifest.json")

    f = sub.add_parser("fit", help="fit latency samples from a CSV file")
    f.add_argument("--samples", required=True)
    f.add_argument("--family", choices=("exp", "gamma", "gev", "auto"), default="auto")
    f.add_argument("--latency", choices=(*LATENCY_KINDS, "all"), default="all")
    f.add_argument("--alpha", type=float, default=0.01, help="KS significance level")
    f.add_argument("--out", required=True, help="JSON report path")

    k = sub.add_parser("kstest", help="KS-test latency samples against a given distribution")
    k.add_argument("--samples", required=True)
    k.add_argument("--dist", required=True, help="e.g. 'gamma:alpha=7.36,beta=5.45'")
    k.add_argument("--latency", choices=LATENCY_KINDS, default="total")
    k.add_argument("--alpha", type=float, default=0.01)

    w = sub.add_parser("sweep", help="run every grid point of a scenario file")
    w.add_argument("--config", required=True)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--out", required=True, help="output directory")
    w.add_argument("--stamp", action="store_true", help="record the wall-clock time in manifest.json")

    r = sub.add_parser("report", help="rebuild the sweep table from an output directory")
    r.add_argument("--in", dest="indir", required=True)
    r.add_argument("--out", required=True)
    return p


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise UsageError(f"--alpha must be in (0, 1), got {alpha}")


def _check_seed(seed):
    if seed < 0:
        raise UsageError(f"--seed must be non-negative, got {seed}")


def _manifest(out, command, seed, config_path, files, stamp):
    doc = {"command": command, "seed": seed, "config": os.path.basename(config_path), "files": sorted(files)}
    if stamp:
        doc["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    report.atomic_write_text(os.path.join(out, "manifest.json"), json.dumps(doc, indent=2) + "\n")


def cmd_simulate(args):
    _check_seed(args.seed)
    spec = load_sweep(args.config)
    if len(spec.points()) != 1:
        raise ConfigError("simulate needs a single operating point; use sweep for grids", field="lambda_t")
    spec = replace(spec, base=replace(spec.base, seed=args.seed))
    point = spec.points()[0]
    summary = run_experiment(point, spec, keep_runs=True)
    if not summary.runs:
        raise RuntimeError("; ".join(summary.errors))
    out = args.out
    files = {
        "samples.csv": lambda p: report.emit_samples(p, summary.runs),
        "blocks.csv": lambda p: report.emit_blocks(p, summary.runs),
        "fit_report.json": lambda p: report.emit_fit_report(p, {k: f.report for k, f in summary.fits.items()}),
        "points.json": lambda p: report.emit_points(p, [summary]),
    }
    for kind in LATENCY_KINDS:
        pooled = np.concatenate([r.latencies(kind) for r in summary.runs])
        files[f"histogram_{kind}.csv"] = lambda p, x=pooled: report.emit_histogram(p, x, args.bin_width)
        files[f"cdf_{kind}.csv"] = lambda p, x=pooled: report.emit_cdf(p, x)
    for name, writer in files.items():
        writer(os.path.join(out, name))
    _manifest(out, "simulate", args.seed, args.config, files, args.stamp)
    for err in summary.errors:
        logger.warning("%s", err)
    total = summary.fits.get("total")
    if total is not None:
        print(f"total latency: mean {summary.means['total']:.4f} s, "
              f"gamma({total.report.distribution.alpha:.4f}, {total.report.distribution.beta:.4f}), "
              f"KS passed in {total.passed_runs}/{summary.runs_used} runs, regime {summary.regime.label.value}")
    return EXIT_OK


def _load_samples(path):
    # an unreadable or malformed input file is a usage problem, not a fit failure
    try:
        return report.parse_samples(path)
    except InputError as exc:
        raise UsageError(str(exc)) from None


def cmd_fit(args):
    _check_alpha(args.alpha)
    samples = _load_samples(args.samples)
    kinds = LATENCY_KINDS if args.latency == "all" else (args.latency,)
    reports = {}
    for kind in kinds:
        values = SampleSet(report.sample_column(samples, kind), kind)
        if args.family == "auto":
            reports[kind] = select_best_fit(values, significance=args.alpha)
        else:
            reports[kind] = fit_report(values, args.family, significance=args.alpha)
    report.emit_fit_report(args.out, reports)
    for kind, rep in reports.items():
        params = ", ".join(f"{k}={v:.6g}" for k, v in rep.distribution.params.items())
        print(f"{kind}: {rep.family}({params}) D={rep.ks_statistic:.4f} "
              f"crit={rep.ks_critical:.4f} {'pass' if rep.passed else 'fail'}")
    return EXIT_OK


def cmd_kstest(args):
    _check_alpha(args.alpha)
    try:
        dist = parse_dist(args.dist)
    except ParameterError as exc:
        raise UsageError(f"--dist: {exc}") from None
    if dist.family not in ("exp", "gamma", "gev"):
        raise UsageError(f"--dist: cannot KS-test against family {dist.family!r}")
    samples = _load_samples(args.samples)
    res = ks_test(report.sample_column(samples, args.latency), dist, args.alpha)
    print(json.dumps({
        "latency": args.latency,
        "dist": {"family": dist.family, "params": dict(dist.params)},
        "ks_statistic": res.statistic,
        "ks_critical": res.critical_value,
        "significance": res.significance,
        "n": res.n,
        "passed": res.passed,
    }))
    return EXIT_OK


def cmd_sweep(args):
    _check_seed(args.seed)
    spec = load_sweep(args.config)
    spec = replace(spec, base=replace(spec.base, seed=args.seed))
    summaries = sweep(spec)
    out = args.out
    files = {
        "sweep.csv": lambda p: report.emit_sweep_table(p, summaries),
        "points.json": lambda p: report.emit_points(p, summaries),
    }
    for name, writer in files.items():
        writer(os.path.join(out, name))
    _manifest(out, "sweep", args.seed, args.config, files, args.stamp)
    failed = [s for s in summaries if s.errors]
    for s in failed:
        logger.warning("point %s: %s", s.point, "; ".join(s.errors))
    print(f"{len(summaries)} points written to {out} ({len(failed)} with errors)")
    return EXIT_OK


def cmd_report(args):
    path = os.path.join(args.indir, "points.json")
    if not os.path.exists(path):
        raise UsageError(f"{path} not found; expected the output directory of simulate or sweep")
    try:
        points = report.parse_points(path)
    except InputError as exc:
        raise UsageError(str(exc)) from None
    report.emit_sweep_table(args.out, points)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "kstest": cmd_kstest,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitError, HlfLatencyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Plain-text artifacts: sample CSVs, fit-report JSON, sweep tables, plot data.

Numbers are written with 9 significant digits (``%.9g``), rows end with a
single ``\\n`` and columns have a fixed order, so identical inputs give
byte-identical files.  Every file is written to a temporary sibling and
renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .errors import InputError
from .harness import LATENCY_KINDS, make_cdf, make_histogram
from .simulator import CutReason, LatencySample

SAMPLE_COLUMNS = (
    "run_id", "tx_id", "t_gen", "endorse_latency", "order_latency",
    "validate_latency", "total_latency", "block_id", "cut_reason",
)
BLOCK_COLUMNS = (
    "run_id", "block_id", "size", "cut_reason", "cut_time", "first_arrival",
    "delivered_time", "validation_start", "commit_time",
)
FIT_FIELDS = (
    "family", "params", "ks_statistic", "ks_critical", "passed",
    "empirical_mean", "bestfit_mean", "n",
)
SWEEP_COLUMNS = (
    "lambda_t", "block_size", "block_timeout", "runs", "excluded",
    "alpha", "beta", "ks_statistic", "ks_critical", "passed_runs",
    "empirical_mean", "bestfit_mean", "best_family",
    "endorse_mean", "order_mean", "validate_mean",
    "timeout_cut_fraction", "tail_fraction", "regime", "error",
)


def fmt(x):
    """9-significant-digit text for a float; integers and strings pass through."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def _read_text(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _csv_records(text, columns, path):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise InputError(f"{path}: empty file")
    if tuple(header) != tuple(columns):
        raise InputError(f"{path}: expected columns {','.join(columns)}, got {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise InputError(f"{path}: line {lineno}: expected {len(columns)} fields, got {len(row)}")
        yield lineno, dict(zip(columns, row))


# --- samples ---------------------------------------------------------------

def _sample_rows(items):
    for item in items:
        if isinstance(item, LatencySample):
            yield (item.run_id, item.tx_id, item.t_gen, item.endorse_latency, item.order_latency,
                   item.validate_latency, item.total_latency, item.block_id, CutReason(item.cut_reason).value)
            continue
        # SimResult: read the columns directly
        reasons = [b.cut_reason.value for b in item.blocks]
        e, o, v, t = item.endorse_latency, item.order_latency, item.validate_latency, item.total_latency
        t_gen = item.t_gen[item.first_kept:]
        blocks = item.block_of[item.first_kept:]
        for j in range(t_gen.size):
            b = int(blocks[j])
            yield (item.run_id, item.first_kept + j, t_gen[j], e[j], o[j], v[j], t[j], b, reasons[b])


def samples_csv(items):
    return _csv_text(SAMPLE_COLUMNS, _sample_rows(items))


def emit_samples(path, items):
    """Write per-transaction samples (SimResult or LatencySample items)."""
    atomic_write_text(path, samples_csv(items))


def parse_samples(path):
    """Read a sample CSV back into LatencySample records."""
    out = []
    for lineno, rec in _csv_records(_read_text(path), SAMPLE_COLUMNS, path):
        try:
            out.append(LatencySample(
                tx_id=int(rec["tx_id"]),
                t_gen=float(rec["t_gen"]),
                endorse_latency=float(rec["endorse_latency"]),
                order_latency=float(rec["order_latency"]),
                validate_latency=float(rec["validate_latency"]),
                total_latency=float(rec["total_latency"]),
                block_id=int(rec["block_id"]),
                cut_reason=CutReason(rec["cut_reason"]),
                run_id=rec["run_id"],
            ))
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
    if not out:
        raise InputError(f"{path}: no sample rows")
    return out


def sample_column(samples, kind):
    """Latency values of one type ('endorse', 'order', 'validate', 'total')."""
    if kind not in LATENCY_KINDS:
        raise InputError(f"unknown latency type {kind!r}; expected one of {LATENCY_KINDS}")
    return np.array([getattr(s, f"{kind}_latency") for s in samples], dtype=float)


def _block_rows(results):
    for r in results:
        for b in r.blocks:
            yield (r.run_id, b.block_id, b.size, b.cut_reason.value, b.cut_time, b.first_arrival,
                   b.delivered_time, b.validation_start, b.commit_time)


def emit_blocks(path, results):
    atomic_write_text(path, _csv_text(BLOCK_COLUMNS, _block_rows(results)))


# --- fit reports -----------------------------------------------------------

def _num(x):
    # JSON has no NaN; undefined quantities are null
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def fit_report_dict(report):
    if isinstance(report, dict):
        return {k: report[k] for k in FIT_FIELDS}
    return {
        "family": report.family,
        "params": {k: float(v) for k, v in report.distribution.params.items()},
        "ks_statistic": _num(report.ks_statistic),
        "ks_critical": _num(report.ks_critical),
        "passed": bool(report.passed),
        "empirical_mean": _num(report.empirical_mean),
        "bestfit_mean": _num(report.bestfit_mean),
        "n": int(report.n),
    }


def _json_text(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def fit_reports_json(reports):
    """``reports`` maps latency type to a FitReport (or an already-built dict)."""
    return _json_text({kind: fit_report_dict(r) for kind, r in reports.items()})


def emit_fit_report(path, reports):
    atomic_write_text(path, fit_reports_json(reports))


def parse_fit_report(path):
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected an object keyed by latency type")
    for kind, rec in doc.items():
        missing = [k for k in FIT_FIELDS if k not in rec]
        if missing:
            raise InputError(f"{path}: {kind}: missing fields {missing}")
    return doc


# --- sweep summaries -------------------------------------------------------

def point_dict(summary):
    """JSON-ready record of one grid point (everything a table row needs)."""
    lam, size, timeout = summary.point
    rec = {
        "lambda_t": float(lam),
        "block_size": int(size),
        "block_timeout": float(timeout),
        "seeds": [int(s) for s in summary.seeds],
        "runs_used": summary.runs_used,
        "excluded": [{"run_id": e.run_id, "run_mean": _num(e.run_mean), "threshold": _num(e.threshold)}
                     for e in summary.excluded],
        "means": {k: _num(v) for k, v in summary.means.items()},
        "fits": {},
        "passed_runs": {},
        "best_fit": {},
        "regime": None,
        "errors": list(summary.errors),
    }
    for kind, f in summary.fits.items():
        rec["fits"][kind] = fit_report_dict(f.report)
        rec["passed_runs"][kind] = f.passed_runs
        if f.best is not None:
            rec["best_fit"][kind] = {
                "family": f.best.family,
                "candidates": {k: _num(v) for k, v in f.best.candidates.items()},
            }
    if summary.regime is not None:
        v = summary.regime
        rec["regime"] = {
            "label": v.label.value,
            "timeout_cut_fraction": v.timeout_cut_fraction,
            "size_cut_fraction": v.size_cut_fraction,
            "tail_fraction": v.tail_fraction,
            "thresholds": {
                "timeout_fraction": v.thresholds.timeout_fraction,
                "tail_fraction": v.thresholds.tail_fraction,
                "size_fraction": v.thresholds.size_fraction,
                "tail_sigmas": v.thresholds.tail_sigmas,
            },
        }
    return rec


def _point_key(rec):
    return (rec["lambda_t"], rec["block_size"], rec["block_timeout"])


def emit_points(path, summaries):
    recs = [s if isinstance(s, dict) else point_dict(s) for s in summaries]
    atomic_write_text(path, _json_text(sorted(recs, key=_point_key)))


def parse_points(path):
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, list):
        raise InputError(f"{path}: expected a list of grid points")
    return doc


def sweep_row(rec):
    """Table row (Gamma fit of the total latency plus context) for one point."""
    if not isinstance(rec, dict):
        rec = point_dict(rec)
    total = rec["fits"].get("total")
    regime = rec.get("regime") or {}
    means = rec.get("means", {})
    return {
        "lambda_t": rec["lambda_t"],
        "block_size": rec["block_size"],
        "block_timeout": rec["block_timeout"],
        "runs": rec["runs_used"],
        "excluded": len(rec["excluded"]),
        "alpha": total["params"].get("alpha") if total else None,
        "beta": total["params"].get("beta") if total else None,
        "ks_statistic": total["ks_statistic"] if total else None,
        "ks_critical": total["ks_critical"] if total else None,
        "passed_runs": rec["passed_runs"].get("total"),
        "empirical_mean": means.get("total"),
        "bestfit_mean": total["bestfit_mean"] if total else None,
        "best_family": rec["best_fit"].get("total", {}).get("family"),
        "endorse_mean": means.get("endorse"),
        "order_mean": means.get("order"),
        "validate_mean": means.get("validate"),
        "timeout_cut_fraction": regime.get("timeout_cut_fraction"),
        "tail_fraction": regime.get("tail_fraction"),
        "regime": regime.get("label"),
        "error": "; ".join(rec["errors"]) or None,
    }


def _row_key(row):
    return (float(row["lambda_t"]), int(row["block_size"]), float(row["block_timeout"]))


def sweep_table_csv(rows):
    rows = sorted((r if isinstance(r, dict) and "runs" in r else sweep_row(r) for r in rows), key=_row_key)
    return _csv_text(SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows))


def emit_sweep_table(path, rows):
    """Write the sweep table sorted by (lambda_t, block_size, block_timeout)."""
    atomic_write_text(path, sweep_table_csv(rows))


_INT_COLUMNS = {"block_size", "runs", "excluded", "passed_runs"}
_STR_COLUMNS = {"best_family", "regime", "error"}


def parse_sweep_table(path):
    rows = []
    for lineno, rec in _csv_records(_read_text(path), SWEEP_COLUMNS, path):
        row = {}
        try:
            for col, text in rec.items():
                if text == "":
                    row[col] = None
                elif col in _INT_COLUMNS:
                    row[col] = int(text)
                elif col in _STR_COLUMNS:
                    row[col] = text
                else:
                    row[col] = float(text)
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
        rows.append(row)
    return rows


# --- plot data -------------------------------------------------------------

def histogram_csv(samples, bin_width):
    h = make_histogram(samples, bin_width)
    rows = ((lo, lo + h.bin_width, int(c), d) for lo, c, d in zip(h.edges, h.counts, h.density))
    return _csv_text(("lower_edge", "upper_edge", "count", "density"), rows)


def cdf_csv(samples):
    x, f = make_cdf(samples)
    return _csv_text(("x", "cdf"), zip(x, f))


def emit_histogram(path, samples, bin_width):
    atomic_write_text(path, histogram_csv(samples, bin_width))


def emit_cdf(path, samples):
    atomic_write_text(path, cdf_csv(samples))


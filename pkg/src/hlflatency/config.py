"""TOML scenario files.

A file describes one operating point or a grid of them::

    seed = 42
    lambda_t = 10            # scalar, or a list to sweep
    block_size = [9, 10, 12]
    block_timeout = 2.0
    n_tx = 1000
    runs_per_point = 10
    warmup_discard = 0
    paired_seeds = false

    [fit]
    significance = 0.01
    outlier_k = 5.0

    [regime]
    timeout_fraction = 0.95
    tail_fraction = 0.01
    size_fraction = 0.95
    tail_sigmas = 4.0

    [models.endorse]         # also order_overhead, validate_base, validate_per_tx
    family = "exp"
    lam = 94.5

Everything except ``lambda_t``, ``block_size`` and ``block_timeout`` is
optional; omitted service models take the calibrated simulator defaults.
Unknown keys are rejected with their line and column.
"""

from __future__ import annotations

import re
import sys

from .distributions import SERVICE_FAMILIES, from_spec
from .errors import ConfigError, HlfLatencyError
from .harness import RegimeThresholds, SweepSpec
from .simulator import SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TOP_KEYS = {
    "seed", "lambda_t", "block_size", "block_timeout", "n_tx", "runs_per_point",
    "warmup_discard", "paired_seeds", "fit", "regime", "models",
}
FIT_KEYS = {"significance", "outlier_k"}
REGIME_KEYS = {"timeout_fraction", "tail_fraction", "size_fraction", "tail_sigmas"}
MODEL_FIELDS = {
    "endorse": "endorse_model",
    "order_overhead": "order_overhead_model",
    "validate_base": "validate_base_model",
    "validate_per_tx": "validate_per_tx_model",
}
GRID_KEYS = ("lambda_t", "block_size", "block_timeout")


def _locate(text, section, key):
    """(line, column) of ``key`` inside ``[section]`` (``""`` for top level)."""
    current = ""
    key_re = re.compile(r'^(\s*)("?)' + re.escape(key) + r'\2\s*=')
    for lineno, line in enumerate(text.splitlines(), start=1):
        header = re.match(r"^\s*\[([^\[\]]+)\]", line)
        if header:
            current = header.group(1).strip()
            continue
        m = key_re.match(line)
        if m and current == section:
            return lineno, len(m.group(1)) + 1
        if current == "" and section and line.lstrip().startswith(section + "."):
            # dotted key form, e.g. fit.alpha = 1
            dotted = line.lstrip()[len(section) + 1:]
            if re.match(re.escape(key) + r"\s*[=.]", dotted):
                return lineno, len(line) - len(line.lstrip()) + 1
    header_re = re.compile(r"^\s*\[" + re.escape(f"{section}.{key}" if section else key) + r"\]")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if header_re.match(line):
            return lineno, 1
    return None, None


def _check_keys(table, allowed, section, text, path):
    for key in table:
        if key not in allowed:
            line, col = _locate(text, section, key)
            name = f"{section}.{key}" if section else key
            raise ConfigError(f"unknown key in {path}", field=name, line=line, column=col)


def _model(name, table, text, path):
    section = f"models.{name}"
    if not isinstance(table, dict):
        raise ConfigError("must be a table with a 'family' key", field=section)
    family = table.get("family")
    if family not in SERVICE_FAMILIES:
        raise ConfigError(f"unknown or missing family {family!r}; expected one of {sorted(SERVICE_FAMILIES)}",
                          field=f"{section}.family")
    allowed = {"family", *SERVICE_FAMILIES[family].__dataclass_fields__}
    _check_keys(table, allowed, section, text, path)
    params = {k: v for k, v in table.items() if k != "family"}
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"must be a number, got {v!r}", field=f"{section}.{k}")
    try:
        return from_spec(family, params)
    except HlfLatencyError as exc:
        raise ConfigError(str(exc), field=section) from None


def _axis(doc, key):
    if key not in doc:
        raise ConfigError("required key is missing", field=key)
    value = doc[key]
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError("grid axis must not be empty", field=key)
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"must be a number or list of numbers, got {v!r}", field=key)
    if key == "block_size":
        for v in values:
            if isinstance(v, float) and not v.is_integer():
                raise ConfigError(f"must be an integer, got {v!r}", field=key)
        values = [int(v) for v in values]
    else:
        values = [float(v) for v in values]
    return values, isinstance(value, list)


def _int(doc, key, default):
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"must be an integer, got {value!r}", field=key)
    return value


def _number(table, key, default, section):
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"must be a number, got {value!r}", field=f"{section}.{key}")
    return float(value)


def loads_config(text, path="<string>"):
    """Parse TOML text into a validated :class:`SweepSpec`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", str(exc))
        if line is None:
            m = re.search(r"line (\d+), column (\d+)", str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
        raise ConfigError(f"{msg} (in {path})", line=line, column=col) from None
    _check_keys(doc, TOP_KEYS, "", text, path)
    for section, allowed in (("fit", FIT_KEYS), ("regime", REGIME_KEYS), ("models", set(MODEL_FIELDS))):
        if section in doc:
            if not isinstance(doc[section], dict):
                raise ConfigError("must be a table", field=section)
            _check_keys(doc[section], allowed, section, text, path)

    axes = {key: _axis(doc, key)[0] for key in GRID_KEYS}
    models = {MODEL_FIELDS[name]: _model(name, table, text, path)
              for name, table in doc.get("models", {}).items()}
    paired = doc.get("paired_seeds", False)
    if not isinstance(paired, bool):
        raise ConfigError(f"must be true or false, got {paired!r}", field="paired_seeds")
    base = SimConfig(
        lambda_t=axes["lambda_t"][0],
        block_size=axes["block_size"][0],
        block_timeout=axes["block_timeout"][0],
        n_tx=_int(doc, "n_tx", 1000),
        seed=_int(doc, "seed", 0),
        warmup_discard=_int(doc, "warmup_discard", 0),
        **models,
    )
    fit_table = doc.get("fit", {})
    regime_table = doc.get("regime", {})
    defaults = RegimeThresholds()
    spec = SweepSpec(
        lambda_t=tuple(axes["lambda_t"]),
        block_size=tuple(axes["block_size"]),
        block_timeout=tuple(axes["block_timeout"]),
        base=base,
        runs_per_point=_int(doc, "runs_per_point", 10),
        significance=_number(fit_table, "significance", 0.01, "fit"),
        outlier_k=_number(fit_table, "outlier_k", 5.0, "fit"),
        thresholds=RegimeThresholds(**{
            k: _number(regime_table, k, getattr(defaults, k), "regime") for k in REGIME_KEYS
        }),
        paired_seeds=paired,
    )
    return spec.validate()


def load_sweep(path):
    """Read a scenario file; always returns a :class:`SweepSpec`."""
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return loads_config(text, str(path))


def parse_config(path):
    """Read a scenario file.

    A file with a single operating point yields a :class:`SimConfig`; a file
    where any of ``lambda_t``, ``block_size``, ``block_timeout`` is a list
    yields a :class:`SweepSpec`.
    """
    spec = load_sweep(path)
    if len(spec.points()) == 1 and not _has_lists(path):
        return spec.base
    return spec


def _has_lists(path):
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return any(isinstance(doc.get(k), list) for k in GRID_KEYS)

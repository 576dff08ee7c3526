"""Deterministic report files plus a tolerance-aware diff.

Summaries are JSON with sorted keys, bulk numbers are CSV; both are
byte-reproducible from (config, seed).  Timestamps and environment notes go
to a separate metadata file so reruns can be compared byte for byte.
"""

from __future__ import annotations

import datetime
import json
import os
import sys
from typing import Any, Iterable, Sequence


class ParseError(ValueError):
    """A report or config file failed to parse."""


class SchemaError(ValueError):
    """Two reports cannot be compared field by field."""


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_json(path: str, obj: Any) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def write_metadata(path: str, extra: dict | None = None) -> None:
    """The one output file that is allowed to differ between reruns."""
    info = {
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "argv": sys.argv,
        "python": sys.version.split()[0],
    }
    if extra:
        info.update(extra)
    write_json(path, info)


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _flatten(obj: Any, prefix: str, out: dict[str, Any]) -> None:
    if isinstance(obj, dict):
        for key in obj:
            _flatten(obj[key], f"{prefix}.{key}" if prefix else str(key), out)
    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            _flatten(item, f"{prefix}[{i}]", out)
    else:
        out[prefix] = obj


def report_diff(path_a: str, path_b: str, tolerance: float = 0.0) -> dict[str, dict]:
    """Field-wise diff of two JSON reports.

    Numeric leaves differing by more than the tolerance are reported;
    non-numeric leaves must match exactly.  A structural mismatch (different
    keys or types) raises SchemaError.
    """
    flat_a: dict[str, Any] = {}
    flat_b: dict[str, Any] = {}
    _flatten(load_json(path_a), "", flat_a)
    _flatten(load_json(path_b), "", flat_b)
    if set(flat_a) != set(flat_b):
        missing = set(flat_a) ^ set(flat_b)
        raise SchemaError(f"reports have different fields: {sorted(missing)[:10]}")
    diff: dict[str, dict] = {}
    for key in sorted(flat_a):
        a, b = flat_a[key], flat_b[key]
        numeric = isinstance(a, (int, float)) and not isinstance(a, bool)
        numeric_b = isinstance(b, (int, float)) and not isinstance(b, bool)
        if numeric != numeric_b or (not numeric and type(a) is not type(b)):
            raise SchemaError(f"field {key} has mismatched types {type(a)} vs {type(b)}")
        if numeric:
            if abs(float(a) - float(b)) > tolerance:
                diff[key] = {"a": a, "b": b, "delta": float(b) - float(a)}
        elif a != b:
            diff[key] = {"a": a, "b": b}
    return diff

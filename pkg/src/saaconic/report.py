"""Deterministic delimited and JSON output.

Floats are printed with 17 significant digits so every value round-trips
exactly; rows are emitted in a fixed column order with a schema tag in
the first column.  Everything except wall-clock columns is reproducible
byte-for-byte from identical inputs.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

from .lab import SweepRecord


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if any(ch in text for ch in (",", '"', "\n")):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_sweep_csv(records: list[SweepRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SweepRecord.COLUMNS) + "\n")
        for rec in records:
            row = rec.row()
            fh.write(",".join(_cell(row[c]) for c in SweepRecord.COLUMNS) + "\n")
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema": "saaconic.v1"}
    payload.update(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_records_json(records: list[SweepRecord], path) -> Path:
    return write_json({"records": [r.row() for r in records]}, path)


def default_out_dir() -> Path:
    return Path(os.environ.get("SAACONIC_OUT", "runs"))

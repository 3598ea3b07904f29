"""CSV/JSON emitters with round-trip float formatting and atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__


class NonFiniteOutputError(ArithmeticError):
    pass


def format_value(v):
    """Floats with 17 significant digits; other scalars as plain strings."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _check_finite(records):
    for i, rec in enumerate(records):
        for key, v in rec.items():
            if isinstance(v, (float, np.floating)) and not math.isfinite(v):
                raise NonFiniteOutputError(f"record {i} field {key!r} is {v}")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def metadata_header(config: dict | None = None, **extra) -> dict:
    meta = {"library": "goldilocks_qca", "version": __version__}
    if config is not None:
        meta["config"] = _jsonable(config)
    meta.update(_jsonable(extra))
    meta["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return meta


def render_csv(records, columns, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    for key, val in (metadata or {}).items():
        buf.write(f"# {key}: {json.dumps(_jsonable(val), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([format_value(rec.get(c)) for c in columns])
    return buf.getvalue()


def render_json(records, columns, metadata: dict | None = None) -> str:
    # repr of a Python float is the shortest round-trip form
    rows = [{c: _jsonable(rec.get(c)) for c in columns} for rec in records]
    return json.dumps({"metadata": _jsonable(metadata or {}), "columns": list(columns), "records": rows}, indent=1) + "\n"


def atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(records, path, columns, fmt: str = "csv", metadata: dict | None = None) -> str:
    """Write ``records`` (dicts) to ``path`` and return the rendered text.

    Raises
    ------
    NonFiniteOutputError
        If any float field is NaN or infinite; nothing is written.
    """
    records = list(records)
    _check_finite(records)
    if fmt == "csv":
        text = render_csv(records, columns, metadata)
    elif fmt == "json":
        text = render_json(records, columns, metadata)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        atomic_write(path, text)
    return text


def read_csv(path):
    """Parse an emitted CSV back into ``(metadata, rows)``; values stay strings."""
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                meta[key] = json.loads(val)
            else:
                lines.append(line)
    rows = list(csv.DictReader(lines))
    return meta, rows


__all__ = ["emit", "format_value", "metadata_header", "atomic_write", "read_csv", "NonFiniteOutputError"]

"""Atomic CSV/JSON writers: data goes to a temporary file that is renamed into place."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence


def format_value(v) -> str:
    if v is None:
        return "N.A."
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    if hasattr(v, "item"):
        return format_value(v.item())
    return str(v)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def csv_text(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    rows = list(rows)
    if columns is None:
        if not rows:
            raise ValueError("column names are required for an empty table")
        columns = list(rows[0])
    for r in rows:
        if list(r) != list(columns):
            raise ValueError("rows must share the same columns in the same order")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


def emit_table(rows: Iterable[dict], path, columns: Sequence[str] | None = None) -> None:
    """Write rows as CSV with a header; an empty row set yields a header-only file."""
    _atomic_write(path, csv_text(list(rows), columns))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def emit_json(obj, path) -> None:
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

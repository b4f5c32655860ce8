"""CSV tables with ``#`` metadata lines, written atomically.

The body (header plus rows) is formatted deterministically: floats use 17
significant digits, so identical inputs give byte-identical bodies.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

__all__ = ["format_value", "table_body", "write_table", "read_table", "atomic_write_text", "split_metadata"]


def format_value(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if hasattr(v, "item"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def table_body(rows, columns=None):
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c, "")) for c in columns])
    return buf.getvalue()


def atomic_write_text(path, text):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_table(path, rows, columns=None, metadata=None):
    meta = ""
    for k, v in (metadata or {}).items():
        if not isinstance(v, str):
            v = json.dumps(v, sort_keys=True)
        meta += f"# {k}: {v}\n"
    return atomic_write_text(path, meta + table_body(rows, columns))


def split_metadata(text):
    meta, body = {}, []
    for line in text.splitlines(keepends=True):
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(":")
            meta[key.strip()] = val.strip()
        else:
            body.append(line)
    return meta, "".join(body)


def read_table(path):
    """Rows as dicts of strings plus the metadata dict."""
    meta, body = split_metadata(Path(path).read_text(encoding="utf-8"))
    rows = list(csv.DictReader(io.StringIO(body)))
    return rows, meta

"""CSV and text output. Every file is written atomically (temp file + rename)."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(x) -> str:
    """Full-precision, locale-independent number formatting."""
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, rows


def field_rows(field):
    pts = field.mesh.points
    return [(*pt, v) for pt, v in zip(pts, field.values)]


def write_field_csv(path, field) -> Path:
    d = field.mesh.dim
    header = [f"x{i + 1}" for i in range(d)] + ["value"]
    return write_csv(path, header, field_rows(field))


def write_trace_csv(path, trace, name="energy") -> Path:
    return write_csv(path, ["iteration", name], list(enumerate(trace)))

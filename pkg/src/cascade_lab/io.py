"""Artifact writers: versioned JSON and CSV, plus gnuplot scripts.

CSV files start with a ``# schema_version=...`` comment line followed by an
RFC-4180 table (csv module, CRLF row ends, minimal quoting).  JSON is UTF-8
with sorted keys.  Nothing time- or host-dependent is written, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import SCHEMA_VERSION


def _plain(obj):
    """Convert numpy scalars, tuples and complex numbers to JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(doc: dict, kind: str) -> str:
    body = dict(_plain(doc))
    body.setdefault("schema_version", SCHEMA_VERSION)
    body.setdefault("kind", kind)
    return json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, doc: dict, kind: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json_text(doc, kind), encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], kind: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION} kind={kind}\r\n")
        w = csv.writer(fh)  # excel dialect: RFC-4180 quoting and CRLF
        w.writerow(list(header))
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Returns (schema line, header, rows as strings)."""
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        rows = list(csv.reader(fh))
    return first, rows[0], rows[1:]


def write_gnuplot(path, data_file: str, columns: Sequence[int], titles: Sequence[str], xlabel: str,
                  ylabel: str, logscale: str = "") -> Path:
    """A plain gnuplot script plotting the given CSV columns against column 1."""
    path = Path(path)
    lines = [f"# schema_version={SCHEMA_VERSION} kind=gnuplot",
             "set datafile separator ','",
             "set key outside",
             f"set xlabel '{xlabel}'",
             f"set ylabel '{ylabel}'"]
    if logscale:
        lines.append(f"set logscale {logscale}")
    plots = [f"'{data_file}' every ::1 using 1:{c} with lines title '{t}'" for c, t in zip(columns, titles)]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

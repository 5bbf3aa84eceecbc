"""Tidy CSV and JSON sidecar output.

CSV files start with ``#`` comment lines carrying the config hash and other
provenance; the only line that varies between identical runs is
``# created: ...``.  :func:`csv_body` strips all comment lines.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from pathlib import Path


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(str(_fmt(x)) for x in v)
    return v


def write_csv(path, rows: list[dict], columns: list[str], header: dict | None = None,
              timestamp: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    if timestamp:
        buf.write(f"# created: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k, "")) for k in columns})
    path.write_text(buf.getvalue())
    return path


def csv_body(text: str) -> str:
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def read_csv(path) -> list[dict]:
    return list(csv.DictReader(io.StringIO(csv_body(Path(path).read_text()))))


def write_sidecar(path, **fields) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(fields, indent=2, sort_keys=True) + "\n")
    return path

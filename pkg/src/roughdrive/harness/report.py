"""Reports: deterministic JSON, CSV tables and a separate metadata file.

``report.json`` depends only on the resolved config and the computation, so
re-running with the same seed reproduces it byte for byte.  Wall-clock times,
host details and timestamps go to ``metadata.json``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..parallel import max_threads

SCHEMA_VERSION = 1


@dataclass
class Check:
    """One threshold comparison: ``value <op> threshold``."""

    name: str
    value: float | None
    threshold: float | None
    op: str = "<="
    note: str = ""

    @property
    def passed(self) -> bool:
        if self.op == "true":
            return bool(self.value)
        if self.value is None or self.threshold is None:
            return False
        v, t = float(self.value), float(self.threshold)
        if not math.isfinite(v):
            return False
        return {"<=": v <= t, "<": v < t, ">=": v >= t, ">": v > t}[self.op]

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "op": self.op, "passed": self.passed, "note": self.note}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.op == "true":
            return f"{status} {self.name}"
        return f"{status} {self.name}: {_fmt(self.value)} {self.op} {_fmt(self.threshold)}"


def _fmt(x) -> str:
    return "None" if x is None else f"{float(x):.6g}"


@dataclass
class Report:
    name: str
    config: dict
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def check(self, name, value, threshold, op="<=", note="") -> Check:
        c = Check(name, None if value is None else _plain(value),
                  None if threshold is None else _plain(threshold), op, note)
        self.checks.append(c)
        return c

    def table(self, name: str, header, rows) -> None:
        self.tables[name] = (list(header), [list(r) for r in rows])

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return _plain({
            "schema_version": SCHEMA_VERSION,
            "library_version": __version__,
            "name": self.name,
            "config": self.config,
            "results": self.results,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
            "tables": sorted(self.tables),
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def lines(self) -> list:
        return [c.line() for c in self.checks]


def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays become Python objects, non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows) -> None:
    """Comma-separated, header row, floats written with ``repr`` (round-trips doubles)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def metadata(report: Report, started: float) -> dict:
    return {
        "timestamp_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_seconds": time.perf_counter() - started,
        "timings": report.timings,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "threads": max_threads(),
        "pid": os.getpid(),
    }


def write_report(report: Report, out_dir, started: float | None = None) -> Path:
    """Write ``report.json``, ``metadata.json`` and one CSV per table; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    for name, (header, rows) in sorted(report.tables.items()):
        write_csv(out / f"{name}.csv", header, rows)
    meta = metadata(report, time.perf_counter() if started is None else started)
    (out / "metadata.json").write_text(json.dumps(_plain(meta), sort_keys=True, indent=2) + "\n")
    return out

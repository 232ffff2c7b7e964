"""Writing reports: one CSV per table and a single ``summary.json``."""
from __future__ import annotations

import csv
import json
import math
import os
import subprocess
from pathlib import Path

import numpy as np

SUMMARY = "summary.json"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows):
    """RFC-4180 CSV: CRLF line ends, minimal quoting, ``repr`` floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row of {len(row)} cells for {len(columns)} columns")
            w.writerow([_cell(v) for v in row])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def git_describe(cwd=None) -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=cwd or os.path.dirname(__file__), capture_output=True,
                             text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def emit(report, output_dir=None, formats=("csv", "json")) -> list:
    """Write ``report`` into ``output_dir`` (default: its config's); returns
    the written paths.  A table without rows is written as a header line."""
    cfg = report.config
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        for name, (columns, rows) in report.tables().items():
            path = out / f"{name}.csv"
            write_csv(path, columns, rows)
            written.append(path)
    if "json" in formats:
        doc = {
            "experiment": cfg.name,
            "seed": cfg.sim.seed,
            "git_describe": git_describe(),
            "config": cfg.to_dict(),
            "results": report.summary(),
        }
        path = out / SUMMARY
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        written.append(path)
    return written


def load_summary(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class EmptyReport:
    """A report with no rows; used for dry runs and the empty-output contract."""

    def __init__(self, config, tables=None):
        self.config = config
        self._tables = tables or {}

    def tables(self):
        return {k: (cols, []) for k, cols in self._tables.items()}

    def summary(self):
        return {"rows": []}

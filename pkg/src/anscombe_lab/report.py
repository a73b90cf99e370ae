"""Run reports with a canonical serialization.

Floats are rounded to 12 significant digits and keys are sorted, so two runs
with equal contents produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .indices import IndexEstimate

SIG_DIGITS = 12
CSV_COLUMNS = ("quantity", "epsilon", "delta", "alpha", "n", "set", "width", "value", "stderr")


def canonical_float(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    v = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if v == 0 else v


def canonicalize(obj):
    """Plain JSON types with every float rounded to 12 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return canonical_float(float(obj))
    if isinstance(obj, dict):
        return {str(k): canonicalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [canonicalize(v) for v in items]
    if isinstance(obj, np.ndarray):
        return canonicalize(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(canonicalize(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _cell(v):
    if v is None or v == "":
        return ""
    if isinstance(v, (float, np.floating)):
        c = canonical_float(float(v))
        return c if isinstance(c, str) else repr(c)
    return str(v)


@dataclass
class RunReport:
    command: str
    config: dict
    version: str
    verdict: str
    ok: bool
    estimates: list = field(default_factory=list)
    inequality: dict | None = None
    comparison: list | None = None
    oracle: dict | None = None
    wall_time: float | None = None

    def to_dict(self) -> dict:
        out = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "verdict": self.verdict,
            "ok": self.ok,
            "quantities": [e.to_dict(tables=True) for e in self.estimates],
        }
        if self.inequality is not None:
            out["inequality"] = self.inequality
        if self.comparison is not None:
            out["comparison"] = self.comparison
        if self.oracle is not None:
            out["oracle"] = self.oracle
        if self.wall_time is not None:
            out["wall_time_seconds"] = self.wall_time
        return out

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def csv_rows(self):
        def emit(est: IndexEstimate, name: str):
            for coords, value, stderr in est.rows():
                row = {c: "" for c in CSV_COLUMNS}
                row.update({k: coords[k] for k in coords if k in row})
                row.update(quantity=name, value=value, stderr=stderr)
                yield row
            for key, extra in est.extras.items():
                if isinstance(extra, IndexEstimate):
                    yield from emit(extra, f"{name}.{key}")

        for est in self.estimates:
            yield from emit(est, est.name)
        for r in self.comparison or ():
            for col, key in (("mc", "mc"), ("oracle", "oracle")):
                row = {c: "" for c in CSV_COLUMNS}
                row.update(quantity=f"compare.{r['name']}.{col}", value=r[key])
                row["stderr"] = r["stderr"] if col == "mc" else 0.0
                yield row
        for name, value in sorted((self.oracle or {}).get("values", {}).items()):
            row = {c: "" for c in CSV_COLUMNS}
            row.update(quantity=f"oracle.{name}", value=value, stderr=0.0)
            yield row

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.csv_rows():
            w.writerow([_cell(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def render(self, fmt: str = "json") -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()

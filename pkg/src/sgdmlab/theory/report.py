"""Structured results for the verification checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (bool, int, str)) or v is None or isinstance(v, float):
        return v
    return str(v)


@dataclass
class CheckResult:
    """Outcome of one named check with per-iteration evidence rows.

    Each row is (k, lhs, rhs, margin, ok); margin is the signed distance to
    the tolerance boundary, negative iff that row failed.
    """

    name: str
    passed: bool
    summary: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    @property
    def worst_margin(self) -> Optional[float]:
        margins = [r[3] for r in self.rows if r[3] is not None]
        return min(margins) if margins else None

    @classmethod
    def from_arrays(cls, name, ks, lhs, rhs, margin, ok, summary=None) -> "CheckResult":
        rows = [
            (int(k), float(a), float(b), float(m), bool(o))
            for k, a, b, m, o in zip(ks, lhs, rhs, margin, ok)
        ]
        return cls(name=name, passed=bool(np.all(ok)), summary=dict(summary or {}), rows=rows)


@dataclass
class DiagnosticsReport:
    """A bundle of check results plus run metadata, serializable to JSON/CSV."""

    checks: list
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_names(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self, path) -> None:
        payload = {
            "passed": self.passed,
            "meta": _jsonable(self.meta),
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "worst_margin": _jsonable(c.worst_margin),
                    "summary": _jsonable(c.summary),
                }
                for c in self.checks
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def rows_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,check_name,lhs,rhs,margin,pass\n")
            for c in self.checks:
                for k, lhs, rhs, margin, ok in c.rows:
                    fh.write(f"{k},{c.name},{lhs:.17g},{rhs:.17g},{margin:.17g},{int(ok)}\n")

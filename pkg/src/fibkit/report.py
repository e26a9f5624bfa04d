"""Machine-readable run reports.

A report is one JSON object with sorted keys, so identical runs write
identical bytes.  Wall time goes to the console echo only; anything
time-dependent inside the file would break byte-level reproducibility.
"""

from __future__ import annotations

import json
import os
from typing import NamedTuple

from .config import RunConfig


class CheckResult(NamedTuple):
    name: str
    residual: float
    threshold: float
    passed: bool
    resolution_dependent: bool = False

    @classmethod
    def measure(cls, name: str, residual: float, threshold: float,
                resolution_dependent: bool = False) -> "CheckResult":
        return cls(name, float(residual), float(threshold),
                   bool(residual <= threshold), resolution_dependent)


def build_report(command: str, config: RunConfig, checks: list,
                 inputs: dict | None = None, outputs: dict | None = None,
                 extra: dict | None = None) -> dict:
    doc = {
        "command": command,
        "config": config.to_dict(),
        "checks": [
            {
                "name": c.name,
                "residual": c.residual,
                "threshold": c.threshold,
                "pass": c.passed,
                "resolution_dependent": c.resolution_dependent,
            }
            for c in checks
        ],
        "summary": {
            "total": len(checks),
            "passed": sum(1 for c in checks if c.passed),
            "failed": sum(1 for c in checks if not c.passed),
        },
    }
    if inputs:
        doc["inputs"] = dict(inputs)
    if outputs:
        doc["outputs"] = dict(outputs)
    if extra:
        doc.update(extra)
    return doc


def report_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("ascii")


def write_report(doc: dict, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(report_bytes(doc))


def echo_report(doc: dict, wall_time: float) -> None:
    """Console summary: one line per check, then totals and wall time."""
    for check in doc["checks"]:
        verdict = "PASS" if check["pass"] else "FAIL"
        print(f"[{verdict}] {check['name']}: residual {check['residual']:.3e} "
              f"(threshold {check['threshold']:.3e})")
    summary = doc["summary"]
    print(f"{summary['passed']}/{summary['total']} checks passed, "
          f"wall time {wall_time:.2f}s")

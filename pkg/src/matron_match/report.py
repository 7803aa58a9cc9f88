"""Pass/fail reports shared by the order and structure checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class OrderReport:
    """Outcome of a brute-force check.

    ``worst_violation`` is the largest excess found (``<= 0`` means the
    inequality held everywhere that was visited).  ``seed`` is set when the
    pair set was subsampled.
    """

    passed: bool
    worst_violation: float
    witness: dict = field(default_factory=dict)
    pairs_checked: int = 0
    seed: Optional[int] = None
    exhaustive: bool = True
    check: str = ""

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {
            "check": self.check,
            "pass": self.passed,
            "worst_violation": self.worst_violation,
            "witness": self.witness,
            "pairs_checked": self.pairs_checked,
            "seed": self.seed,
            "exhaustive": self.exhaustive,
        }

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        line = f"{self.check or 'check'}: {status} worst_violation={_fmt(self.worst_violation)} pairs={self.pairs_checked}"
        if not self.passed and self.witness:
            line += f" witness={self.witness}"
        return line


def _fmt(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return f"{x:.3e}"

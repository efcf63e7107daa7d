"""Collect named residual checks into a pass/fail report."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

MASK_CAP = 0.2
EXACT_FLOOR = 1e-10


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    passed: bool
    masked_fraction: float = 0.0

    def as_dict(self):
        return {
            "name": self.name,
            "residual": self.residual,
            "tol": self.tol,
            "pass": self.passed,
            "masked_fraction": self.masked_fraction,
        }


@dataclass
class VerificationReport:
    checks: List[Check] = field(default_factory=list)
    mask_cap: float = MASK_CAP

    def add(self, name, residual, tol, masked_fraction=0.0, passed=None):
        residual = float(residual)
        if passed is None:
            passed = bool(np.isfinite(residual) and residual < tol)
        c = Check(name, residual, float(tol), bool(passed), float(masked_fraction))
        self.checks.append(c)
        return c

    def add_ratio(self, name, coarse, fine, lo=3.5, hi=4.5, masked_fraction=0.0):
        """Convergence check on two residuals at step h and h/2.

        Residual stored is |ratio - 4|.  When both residuals sit at round-off
        the ratio is meaningless and the check passes as exact.
        """
        coarse, fine = float(coarse), float(fine)
        if coarse < EXACT_FLOOR and fine < EXACT_FLOOR:
            return self.add(name, 0.0, hi - 4.0, masked_fraction, passed=True)
        ratio = coarse / fine if fine > 0 else np.inf
        return self.add(name, abs(ratio - 4.0), hi - 4.0, masked_fraction,
                        passed=bool(lo <= ratio <= hi))

    def extend(self, other, prefix=""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.residual, c.tol, c.passed,
                                     c.masked_fraction))
        return self

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self):
        return all(c.passed and c.masked_fraction <= self.mask_cap for c in self.checks)

    def as_dict(self):
        return {"checks": [c.as_dict() for c in self.checks], "pass": self.passed}

    def summary(self):
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed and c.masked_fraction <= self.mask_cap else "FAIL"
            extra = f" masked={c.masked_fraction:.3f}" if c.masked_fraction else ""
            lines.append(f"{flag} {c.name}: {c.residual:.3e} (tol {c.tol:.1e}){extra}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)

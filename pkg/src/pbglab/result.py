"""Outcome of a single numerical check."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    identity: str = ""
    details: Dict[str, object] = field(default_factory=dict)
    skipped: bool = False
    note: str = ""
    # when set, the check passes iff residual > tolerance (negative controls)
    expect_failure: bool = False

    @property
    def passed(self) -> Optional[bool]:
        if self.skipped:
            return None
        if self.residual != self.residual:  # nan
            return False
        if self.expect_failure:
            return self.residual > self.tolerance
        return self.residual < self.tolerance

    @property
    def status(self) -> str:
        return {None: "skipped", True: "pass", False: "fail"}[self.passed]

    def __bool__(self) -> bool:
        return bool(self.passed) or self.skipped

    def line(self) -> str:
        if self.skipped:
            return f"{self.name:<26} skipped   {self.note}"
        rel = ">" if self.expect_failure else "<"
        return (f"{self.name:<26} {self.status:<8}  residual {self.residual:.3e} "
                f"{rel} {self.tolerance:.1e}")


def merge(name: str, parts: Dict[str, float], tolerance: float, identity: str = "",
          **details) -> CheckResult:
    """Combine several residuals into one result keyed by the worst one."""
    worst = max(parts.values()) if parts else 0.0
    d = dict(details)
    d["residuals"] = dict(parts)
    return CheckResult(name, float(worst), tolerance, identity, d)

# rydpol/models/verify.py
from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class CheckResult(BaseModel):
    """Outcome of one oracle check."""

    name: str
    passed: bool
    value: float
    tolerance: float
    expected: Optional[float] = None
    detail: str = ""
    extra: Dict[str, Any] = Field(default_factory=dict)


class VerificationReport(BaseModel):
    checks: List[CheckResult]
    engine_version: str
    started_at: datetime
    duration_seconds: float
    six_j_offset: float = 0.0

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def check(self, name: str) -> CheckResult:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)

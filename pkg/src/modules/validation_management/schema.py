"""
Pydantic models for the self-validation report.
"""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class CheckStatus(str, Enum):
    """Verdict of a check or of the whole suite"""
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


class CheckResult(BaseModel):
    """One line of the validation report"""
    name: str = Field(description="Check name")
    group: str = Field(description="Suite the check belongs to")
    statistic: Optional[float] = Field(None, description="Test statistic (z-score, error or p-value)")
    tolerance: Optional[float] = Field(None, description="Pass threshold for the statistic")
    status: CheckStatus = Field(description="Verdict")
    details: str = Field("", description="Human-readable context")

    @property
    def passed(self) -> bool:
        return self.status == CheckStatus.PASSED


class ValidationReport(BaseModel):
    """Complete self-validation run"""
    status: CheckStatus = Field(description="PASSED only when every check passed")
    quick: bool = Field(False, description="Reduced draws and looser tolerances")
    draws: int = Field(description="Draws per sampling oracle")
    sigmas: float = Field(description="Pass band in standard errors")
    checks: List[CheckResult] = Field(default_factory=list)
    faults: List[str] = Field(default_factory=list, description="Deliberately injected faults")
    timings: Dict[str, float] = Field(default_factory=dict, description="Seconds per suite")

    @property
    def failed_checks(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

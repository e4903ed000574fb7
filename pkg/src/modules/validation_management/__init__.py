"""
Self-validation of the numerical identities and estimators.
"""

from .schema import CheckResult, CheckStatus, ValidationReport
from .services import KNOWN_FAULTS, SelfValidationService

__all__ = ["CheckResult", "CheckStatus", "KNOWN_FAULTS", "SelfValidationService", "ValidationReport"]

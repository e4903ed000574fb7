"""
Models for random-matrix identities and their sampling checks.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field


@dataclass(frozen=True, eq=False)
class SpectrumSample:
    """Eigenvalues of A^T A for one Gaussian n x p_bar matrix, descending, zero-padded"""

    eigenvalues: np.ndarray
    n: int
    p_bar: int
    stream: str = ""

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > 0))


class HaarFourthMoments(BaseModel):
    """Fourth-order moments of the entries of a Haar orthogonal p x p matrix"""
    p: int
    m4: float = Field(..., description="E[v_il^4]")
    m22: float = Field(..., description="E[v_il^2 v_ik^2], l != k")
    m_cross: float = Field(..., description="E[v_il v_jl v_ik v_jk], i != j, l != k")


class QExpectation(BaseModel):
    """Diagonal coefficients of E[P_SS P_SS] and E[P_SF P_FS] for the projector P = A^+ A"""
    n: int
    p: int
    p_S: int
    mu_q: float
    mu_qbar: float


class SandwichExpectation(BaseModel):
    """E[A K A^T] = coefficient * I_n for standard Gaussian A"""
    coefficient: float
    n: int


class OracleCheck(BaseModel):
    """Sampled statistic compared with its closed form"""
    name: str = Field(..., description="What is being compared")
    estimate: float = Field(..., description="Sample mean of the statistic")
    expected: float = Field(..., description="Closed-form value")
    stderr: Optional[float] = Field(None, description="Standard error of the estimate")
    z: Optional[float] = Field(None, description="|estimate - expected| / stderr")
    tolerance: float = Field(..., description="Pass band in standard errors")
    draws: int = Field(..., description="Number of samples")
    passed: bool = Field(..., description="Whether the estimate lies inside the band")

    @classmethod
    def compare(cls, name: str, estimate: float, expected: float, stderr: float, tolerance: float, draws: int) -> "OracleCheck":
        """Build a check; a zero or undefined standard error falls back to a relative 1e-12 match."""
        diff = abs(estimate - expected)
        if stderr is None or not np.isfinite(stderr) or stderr == 0:
            passed = diff <= 1e-12 * max(1.0, abs(expected))
            return cls(name=name, estimate=estimate, expected=expected, stderr=None, z=None,
                       tolerance=tolerance, draws=draws, passed=bool(passed))
        z = diff / stderr
        return cls(name=name, estimate=estimate, expected=expected, stderr=stderr, z=z,
                   tolerance=tolerance, draws=draws, passed=bool(z <= tolerance))


class DistributionCheck(BaseModel):
    """Goodness-of-fit test of sampled values against a reference law"""
    name: str
    statistic: float
    p_value: float
    alpha: float
    draws: int
    passed: bool

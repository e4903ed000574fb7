"""
Result models for the closed-form error expressions.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class Regime(str, Enum):
    """Position of (n, p_bar) relative to the interpolation threshold"""
    UNDER = "under"
    OVER = "over"
    NEAR_THRESHOLD = "near_threshold"


class Provenance(str, Enum):
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"


class MomentMethod(str, Enum):
    """How the spectral moments were obtained"""
    SAMPLED = "sampled"
    LARGE_N = "large_n"


class MseBreakdown(BaseModel):
    """Error decomposition of one design point; None marks an undefined or unavailable term"""
    eps: Optional[float] = Field(None, description="MSE on the true parameters [x_S, x_C]")
    eps_S: Optional[float] = Field(None, description="Shared-parameter error")
    eps_C: Optional[float] = Field(None, description="Missing-parameter error, tr(K_x_C)")
    eps_F: Optional[float] = Field(None, description="Fake-parameter error")
    eps_y: Optional[float] = Field(None, description="Output (prediction) MSE")
    eps_stderr: Optional[float] = Field(None, description="Standard error of eps when it is estimated")
    regime: Regime = Field(..., description="Regime of the design point")
    formula_id: str = Field(..., description="Which expression produced the numbers")
    provenance: Provenance = Field(Provenance.ANALYTIC, description="Closed form or Monte Carlo")

    @property
    def defined(self) -> bool:
        return self.eps is not None


class SpectralMoments(BaseModel):
    """Spectral moments of the sample Gram matrix entering the ridge error expression"""
    mu1: float = Field(..., description="E[sum lambda / (lambda + s)^2]")
    mu2: float = Field(..., description="Haar-weighted second moment of s / (lambda + s)")
    stderr1: Optional[float] = Field(None, description="Standard error of mu1 (sampled only)")
    stderr2: Optional[float] = Field(None, description="Standard error of mu2 (sampled only)")
    method: MomentMethod = Field(..., description="Sampled spectra or large-n approximation")
    n: int = Field(..., description="Observations")
    p_bar: int = Field(..., description="Assumed parameters")
    p_S: Optional[int] = Field(None, description="Shared parameters used in mu2 (sampled only)")
    sigma_hat2: float = Field(..., description="Assumed noise variance")
    num_spectra: Optional[int] = Field(None, description="Spectra averaged (sampled only)")
    flagged: bool = Field(False, description="Large-n approximation used outside n >= 10 p_bar")


class FakeCountOptimum(BaseModel):
    """Search of the minimum-norm error over the number of fake features"""
    local_min_pf: Optional[int] = Field(None, description="Best p_F with p_bar > n + 1")
    local_min_eps: Optional[float] = Field(None, description="Error at local_min_pf")
    global_min_pf: int = Field(..., description="Best p_F over the whole searched range")
    global_min_eps: float = Field(..., description="Error at global_min_pf")
    eps_at_zero: Optional[float] = Field(None, description="Error without fake features")
    limit: float = Field(..., description="Error as p_F grows without bound")
    pf_max: int = Field(..., description="Largest p_F searched")

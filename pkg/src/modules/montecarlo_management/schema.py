"""
Pydantic models for Monte Carlo sweep plans and their results.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.settings.config import settings
from src.modules.analytic_management.schema import MseBreakdown, Regime
from src.modules.model_management.schema import FeatureCovariance, ProblemConfig


class SamplingMode(str, Enum):
    """How the inner expectation over unknowns and noise is taken"""
    FULL_SAMPLING = "full_sampling"
    CONDITIONAL_TRACE = "conditional_trace"


class AxisKind(str, Enum):
    FAKE_COUNT = "fake_count"
    ASSUMED_NOISE = "assumed_noise"
    SAMPLE_COUNT = "sample_count"


class RotationPolicy(str, Enum):
    """When the Haar rotation of a decayed feature covariance is redrawn"""
    PER_EXPERIMENT = "per_experiment"
    PER_REALIZATION = "per_realization"


# ProblemConfig field each axis kind overrides
AXIS_FIELDS = {
    AxisKind.FAKE_COUNT: "p_F",
    AxisKind.ASSUMED_NOISE: "sigma_hat2",
    AxisKind.SAMPLE_COUNT: "n",
}


def check_axis_values(kind: AxisKind, values: List[float]) -> List[float]:
    """Raise ValueError unless `values` is a valid axis of this kind."""
    if any(not math.isfinite(value) for value in values):
        raise ValueError("axis values must be finite")
    for previous, current in zip(values, values[1:]):
        if not current > previous:
            raise ValueError(f"axis values must be strictly increasing ({previous} then {current})")
    if kind in (AxisKind.FAKE_COUNT, AxisKind.SAMPLE_COUNT):
        if any(value != int(value) for value in values):
            raise ValueError(f"{kind.value} axis values must be integers")
        floor = 1 if kind == AxisKind.SAMPLE_COUNT else 0
        if any(value < floor for value in values):
            raise ValueError(f"{kind.value} axis values must be >= {floor}")
    elif any(value < 0 for value in values):
        raise ValueError("assumed noise values must be >= 0")
    return values


class SweepAxis(BaseModel):
    """One swept parameter and its strictly increasing values"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: AxisKind = Field(..., description="Which parameter is swept")
    values: List[float] = Field(default_factory=list, description="Axis values, strictly increasing")

    @model_validator(mode="after")
    def validate_values(self) -> "SweepAxis":
        check_axis_values(self.kind, self.values)
        return self

    @property
    def field_name(self) -> str:
        return AXIS_FIELDS[self.kind]

    def apply(self, base: ProblemConfig, value: float) -> ProblemConfig:
        """Base config with the swept field set to `value`."""
        cast = float(value) if self.kind == AxisKind.ASSUMED_NOISE else int(value)
        return base.with_updates(**{self.field_name: cast})


class SweepPlan(BaseModel):
    """Everything a sweep needs; the same plan and seed always give the same result"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    base: ProblemConfig = Field(..., description="Design point the axis varies")
    axis: SweepAxis = Field(..., description="Swept parameter")
    M_r: int = Field(default_factory=lambda: settings.realizations_features, ge=1, description="Feature realizations per cell")
    M_u: int = Field(default_factory=lambda: settings.realizations_unknowns, ge=1, description="Unknown/noise draws per feature realization")
    mode: SamplingMode = Field(SamplingMode.FULL_SAMPLING, description="Inner-expectation mode")
    master_seed: int = Field(default_factory=lambda: settings.default_master_seed, ge=0, description="Root of all streams")
    threads: int = Field(default_factory=lambda: settings.default_threads, ge=1, description="Worker threads")
    num_spectra: int = Field(default_factory=lambda: settings.num_spectra, ge=2, description="Spectra for sampled moments")
    test_points: int = Field(0, ge=0, description="Held-out rows for the output-error estimate (0 disables)")
    feature_cov: Optional[FeatureCovariance] = Field(None, description="Feature row covariances; None is standard Gaussian")
    rotation_policy: RotationPolicy = Field(RotationPolicy.PER_EXPERIMENT, description="Haar rotation redraw policy")
    label: Optional[str] = Field(None, description="Free-form tag carried into the result")


class CellEstimate(BaseModel):
    """Empirical error components of one cell, mean over feature realizations"""
    eps_hat: float
    eps_stderr: Optional[float] = None
    eps_S_hat: float
    eps_S_stderr: Optional[float] = None
    eps_C_hat: float
    eps_C_stderr: Optional[float] = None
    eps_F_hat: float
    eps_F_stderr: Optional[float] = None
    eps_y_hat: Optional[float] = Field(None, description="Held-out output error (test_points > 0)")
    eps_y_stderr: Optional[float] = None
    eps_y_decomposed: float = Field(..., description="eps_S + eps_C + eps_F + sigma_v2 from the same draws")
    eps_y_decomposed_stderr: Optional[float] = None
    M_r: int
    M_u: Optional[int] = Field(None, description="None in conditional_trace mode")
    mode: SamplingMode
    test_points: int = 0
    wall_time_s: float = Field(0.0, description="Wall time; never written to CSV")


class CellResult(BaseModel):
    """One axis value: design point, empirical estimate and analytic companion"""
    axis_value: float
    config: ProblemConfig
    estimate: CellEstimate
    analytic: Optional[MseBreakdown] = None
    regime: Regime

    @property
    def near_threshold(self) -> bool:
        return self.regime == Regime.NEAR_THRESHOLD

    @property
    def eps_normalized(self) -> Optional[float]:
        total = self.config.trace_x
        return self.estimate.eps_hat / total if total > 0 else None

    @property
    def analytic_normalized(self) -> Optional[float]:
        total = self.config.trace_x
        if self.analytic is None or self.analytic.eps is None or total <= 0:
            return None
        return self.analytic.eps / total


class SweepResult(BaseModel):
    plan: SweepPlan
    cells: List[CellResult] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)


class SigmaSweepResult(SweepResult):
    """Sweep over the assumed noise with the empirical argmin"""
    argmin_sigma_hat2: Optional[float] = Field(None, description="Grid value with the smallest empirical error")
    argmin_eps: Optional[float] = None
    optimal_sigma_hat2: Optional[float] = Field(None, description="Closed-form optimum, exact when p_F = 0")
    optimum_exact: bool = Field(False, description="Whether optimal_sigma_hat2 is exact (p_F = 0)")


class CovariancePairResult(BaseModel):
    alpha: float
    alpha_F: float
    sweep: SweepResult


class CovarianceExperimentResult(BaseModel):
    pairs: List[CovariancePairResult] = Field(default_factory=list)
    rotation_policy: RotationPolicy

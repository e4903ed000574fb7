"""
Pydantic models for experiment config files and run manifests.
Every field not written in a config file is filled from settings, so the
resolved model is a complete, self-contained description of a run.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from src.core.settings.config import settings
from src.modules.analytic_management.schema import MomentMethod
from src.modules.dataset_management.schema import ColumnOrder, RealDataSweepPlan, check_sigma_values, check_width_axis
from src.modules.model_management.schema import CovarianceSpec, ProblemConfig
from src.modules.montecarlo_management.schema import AxisKind, RotationPolicy, SamplingMode, check_axis_values
from src.modules.montecarlo_management.services import DEFAULT_COVARIANCE_PAIRS


def expand_axis(value: Any) -> Any:
    """Accept either an explicit list or an inclusive {start, stop, step} table."""
    if isinstance(value, dict):
        unknown = set(value) - {"start", "stop", "step"}
        if unknown or "start" not in value or "stop" not in value:
            raise ValueError("an axis table needs 'start' and 'stop' and may only add 'step'")
        start, stop, step = value["start"], value["stop"], value.get("step", 1)
        if step <= 0:
            raise ValueError("axis step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [start + k * step for k in range(max(count, 0))]
        if all(isinstance(v, int) for v in (start, stop, step)):
            return [int(v) for v in values]
        return [float(v) for v in values]
    return value


class CommonOptions(BaseModel):
    """Fields shared by every experiment section"""
    model_config = ConfigDict(extra="forbid")

    master_seed: int = Field(default_factory=lambda: settings.default_master_seed, ge=0, description="Root of all streams")
    threads: int = Field(default_factory=lambda: settings.default_threads, ge=1, description="Worker threads")


class DesignOptions(CommonOptions):
    """Dimensions and powers of the underlying system"""

    p_S: int = Field(..., ge=0, description="Shared parameters")
    p_C: int = Field(0, ge=0, description="Missing parameters")
    n: int = Field(..., ge=1, description="Observations")
    x_S_scale: float = Field(1.0, ge=0, description="Isotropic prior variance of x_S")
    x_C_scale: float = Field(1.0, ge=0, description="Isotropic prior variance of x_C")

    @property
    def trace_x_S(self) -> float:
        return self.x_S_scale * self.p_S

    @property
    def trace_x_C(self) -> float:
        return self.x_C_scale * self.p_C


class AnalyticConfig(DesignOptions):
    """Grid of closed-form evaluations: noise levels x assumed noise x fake count"""

    p_F: List[int] = Field(default_factory=list, description="Fake-count axis")
    sigma_v2: List[float] = Field(default_factory=lambda: [1.0], description="True noise variances")
    sigma_hat2: List[float] = Field(default_factory=lambda: [0.0], description="Assumed noise variances")
    moment_method: MomentMethod = Field(MomentMethod.SAMPLED, description="Spectral moments for sigma_hat2 > 0")
    num_spectra: int = Field(default_factory=lambda: settings.num_spectra, ge=2)

    @field_validator("p_F", "sigma_v2", "sigma_hat2", mode="before")
    @classmethod
    def expand_axes(cls, v: Any) -> Any:
        return expand_axis(v)

    @field_validator("p_F")
    @classmethod
    def validate_fake_counts(cls, v: List[int]) -> List[int]:
        if any(value < 0 for value in v):
            raise ValueError("fake counts must be >= 0")
        return v

    @field_validator("sigma_v2", "sigma_hat2")
    @classmethod
    def validate_variances(cls, v: List[float]) -> List[float]:
        if any(not np.isfinite(value) or value < 0 for value in v):
            raise ValueError("variances must be finite and >= 0")
        return v


class MonteCarloProtocol(str, Enum):
    SWEEP = "sweep"
    SIGMA = "sigma"
    DECOMPOSITION = "decomposition"
    COVARIANCE = "covariance"


# Axis swept by each fixed-axis protocol; "sweep" reads it from the config
PROTOCOL_AXES: Dict[MonteCarloProtocol, AxisKind] = {
    MonteCarloProtocol.SIGMA: AxisKind.ASSUMED_NOISE,
    MonteCarloProtocol.DECOMPOSITION: AxisKind.FAKE_COUNT,
    MonteCarloProtocol.COVARIANCE: AxisKind.FAKE_COUNT,
}


class MonteCarloConfig(DesignOptions):
    """One Monte Carlo protocol over one axis"""

    protocol: MonteCarloProtocol = Field(MonteCarloProtocol.SWEEP, description="Which experiment to run")
    p_F: int = Field(0, ge=0, description="Fake parameters at the base design point")
    sigma_v2: float = Field(1.0, ge=0, description="True noise variance")
    sigma_hat2: float = Field(0.0, ge=0, description="Assumed noise variance at the base design point")
    axis: AxisKind = Field(AxisKind.FAKE_COUNT, description="Swept parameter (protocol 'sweep')")
    values: List[float] = Field(default_factory=list, description="Axis values")
    M_r: int = Field(default_factory=lambda: settings.realizations_features, ge=1)
    M_u: int = Field(default_factory=lambda: settings.realizations_unknowns, ge=1)
    mode: SamplingMode = Field(SamplingMode.FULL_SAMPLING)
    test_points: Optional[int] = Field(None, ge=0, description="Held-out rows; the decomposition protocol defaults to settings")
    num_spectra: int = Field(default_factory=lambda: settings.num_spectra, ge=2)
    rotation_policy: RotationPolicy = Field(RotationPolicy.PER_EXPERIMENT)
    pairs: List[Tuple[float, float]] = Field(
        default_factory=lambda: [tuple(p) for p in DEFAULT_COVARIANCE_PAIRS],
        description="(alpha, alpha_F) pairs of the covariance protocol",
    )

    @field_validator("values", mode="before")
    @classmethod
    def expand_values(cls, v: Any) -> Any:
        return expand_axis(v)

    @field_validator("values")
    @classmethod
    def validate_values(cls, v: List[float], info: ValidationInfo) -> List[float]:
        protocol = info.data.get("protocol", MonteCarloProtocol.SWEEP)
        return check_axis_values(PROTOCOL_AXES.get(protocol) or info.data.get("axis", AxisKind.FAKE_COUNT), v)

    @property
    def axis_kind(self) -> AxisKind:
        return PROTOCOL_AXES.get(self.protocol) or self.axis

    def int_values(self) -> List[int]:
        return [int(v) for v in self.values]

    def resolved_test_points(self) -> int:
        if self.test_points is not None:
            return self.test_points
        return settings.test_points if self.protocol == MonteCarloProtocol.DECOMPOSITION else 0

    def to_problem(self) -> ProblemConfig:
        return ProblemConfig.build(
            p_S=self.p_S,
            p_C=self.p_C,
            p_F=self.p_F,
            n=self.n,
            sigma_v2=self.sigma_v2,
            sigma_hat2=self.sigma_hat2,
            cov_x_S=CovarianceSpec.isotropic(self.x_S_scale),
            cov_x_C=CovarianceSpec.isotropic(self.x_C_scale),
        )


class PlantedOptions(BaseModel):
    """Synthetic stand-in table drawn from the underlying system"""
    model_config = ConfigDict(extra="forbid")

    N: int = Field(64, ge=2)
    P: int = Field(500, ge=1)
    signal_features: Optional[int] = Field(None, ge=0, description="Columns carrying signal; None means all P")
    sigma_v2: float = Field(1.0, ge=0)


class RealDataConfig(CommonOptions):
    """Width sweep over a tabular dataset"""

    data: Optional[str] = Field(None, description="CSV path; the --data flag overrides it")
    response_column: str = Field("y", description="Name of the response column")
    train_count: int = Field(..., ge=1)
    test_count: int = Field(..., ge=1)
    widths: List[int] = Field(default_factory=list, description="p_bar axis")
    sigma_hat2: List[float] = Field(default_factory=lambda: [0.0])
    repeats: int = Field(1000, ge=1)
    column_order: ColumnOrder = Field(ColumnOrder.AS_IS)
    standardize: bool = Field(False)
    planted: PlantedOptions = Field(default_factory=PlantedOptions, description="Used by --planted")

    @field_validator("widths", "sigma_hat2", mode="before")
    @classmethod
    def expand_axes(cls, v: Any) -> Any:
        return expand_axis(v)

    @field_validator("widths")
    @classmethod
    def validate_widths(cls, v: List[int]) -> List[int]:
        return check_width_axis(v)

    @field_validator("sigma_hat2")
    @classmethod
    def validate_sigmas(cls, v: List[float]) -> List[float]:
        return check_sigma_values(v)

    def to_plan(self) -> RealDataSweepPlan:
        return RealDataSweepPlan(
            train_count=self.train_count,
            test_count=self.test_count,
            width_axis=self.widths,
            sigma_hat2_values=self.sigma_hat2,
            repeats=self.repeats,
            column_order=self.column_order,
            standardize=self.standardize,
            master_seed=self.master_seed,
            threads=self.threads,
        )


class ValidateConfig(CommonOptions):
    """Self-validation options"""

    quick: bool = Field(False, description="Reduced draws and looser tolerances")
    inject_fault: Optional[str] = Field(None, description="Deliberate fault for mutation testing")


SECTION_MODELS = {
    "analytic": AnalyticConfig,
    "montecarlo": MonteCarloConfig,
    "realdata": RealDataConfig,
    "validate": ValidateConfig,
}


class OutputRecord(BaseModel):
    """One file written by a run"""
    name: str = Field(..., description="File name, relative to the manifest")
    sha256: str
    rows: int


class RunManifest(BaseModel):
    """Everything needed to reproduce and check one run"""
    tool: str = Field(default_factory=lambda: settings.app_name)
    tool_version: str = Field(default_factory=lambda: settings.app_version)
    command: str
    master_seed: int
    resolved_config: Dict[str, Any] = Field(..., description="Section model with every default filled in")
    timings: Dict[str, Any] = Field(default_factory=dict)
    outputs: List[OutputRecord] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict, description="Protocol-level results not in the CSV rows")
    created_at: str

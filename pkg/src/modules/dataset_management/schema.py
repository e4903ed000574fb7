"""
Tabular datasets and the width-sweep plan/result models.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import InvalidInputError
from src.core.settings.config import settings
from src.modules.analytic_management.schema import Regime


class ColumnOrder(str, Enum):
    """Which columns make up the first p_bar at each width"""
    AS_IS = "as_is"
    SHUFFLED = "shuffled"  # fresh permutation per experiment


class DatasetProvenance(BaseModel):
    source_path: str = Field(..., description="File the data was read from")
    sha256: str = Field(..., description="Hash of the raw file bytes")
    total_rows: int = Field(..., description="Data rows in the file")
    rejected_rows: int = Field(0, description="Rows dropped for non-finite values")
    dropped_columns: List[str] = Field(default_factory=list, description="Non-numeric columns left out")


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """N x P feature matrix and response, all finite"""

    features: np.ndarray
    response: np.ndarray
    column_names: List[str] = field(default_factory=list)
    provenance: Optional[DatasetProvenance] = None

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.response.shape != (self.features.shape[0],):
            raise InvalidInputError(
                f"features {self.features.shape} and response {self.response.shape} do not line up"
            )
        if self.N < 2 or self.P < 1:
            raise InvalidInputError(f"need N >= 2 rows and P >= 1 columns, got N={self.N}, P={self.P}")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.response))):
            raise InvalidInputError("dataset contains non-finite values")

    @property
    def N(self) -> int:
        return int(self.features.shape[0])

    @property
    def P(self) -> int:
        return int(self.features.shape[1])


def check_width_axis(widths: List[int]) -> List[int]:
    if any(w < 1 for w in widths):
        raise ValueError("widths must be >= 1")
    for previous, current in zip(widths, widths[1:]):
        if not current > previous:
            raise ValueError(f"widths must be strictly increasing ({previous} then {current})")
    return widths


def check_sigma_values(values: List[float]) -> List[float]:
    if not values:
        raise ValueError("at least one sigma_hat2 value is required")
    if any(not np.isfinite(s) or s < 0 for s in values):
        raise ValueError("sigma_hat2 values must be finite and >= 0")
    return values


class RealDataSweepPlan(BaseModel):
    """Repeated random splits and a sweep over the number of columns used"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    train_count: int = Field(..., ge=1, description="n: training rows per experiment")
    test_count: int = Field(..., ge=1, description="n*: held-out rows per experiment")
    width_axis: List[int] = Field(..., description="p_bar values, strictly increasing")
    sigma_hat2_values: List[float] = Field(default_factory=lambda: [0.0], description="Assumed noise variances")
    repeats: int = Field(1000, ge=1, description="M: number of random splits")
    column_order: ColumnOrder = Field(ColumnOrder.AS_IS, description="Column order policy")
    standardize: bool = Field(False, description="Center and scale columns with training statistics")
    master_seed: int = Field(default_factory=lambda: settings.default_master_seed, ge=0)
    threads: int = Field(default_factory=lambda: settings.default_threads, ge=1)

    @field_validator("width_axis")
    @classmethod
    def validate_widths(cls, v: List[int]) -> List[int]:
        return check_width_axis(v)

    @field_validator("sigma_hat2_values")
    @classmethod
    def validate_sigmas(cls, v: List[float]) -> List[float]:
        return check_sigma_values(v)

    def validate_for(self, data: TabularDataset) -> None:
        """Raise InvalidInputError when the plan does not fit the data shape."""
        if self.train_count + self.test_count > data.N:
            raise InvalidInputError(
                f"train_count + test_count = {self.train_count + self.test_count} exceeds N={data.N}"
            )
        if self.width_axis and self.width_axis[-1] > data.P:
            raise InvalidInputError(f"width {self.width_axis[-1]} exceeds P={data.P}")


class WidthPoint(BaseModel):
    """Average over experiments at one (width, sigma_hat2)"""
    width: int
    sigma_hat2: float
    mean_error: float
    stderr: Optional[float] = None
    mean_train_residual: float
    regime: Regime


class DoubleDescentSummary(BaseModel):
    sigma_hat2: Optional[float] = None
    train_count: int
    peak_width: int
    global_min_width: int
    min_error: float
    underparam_min_error: Optional[float] = None
    overparam_global_min: bool = Field(..., description="Whether the global minimum lies at p_bar > n")


class RealDataSweepResult(BaseModel):
    points: List[WidthPoint] = Field(default_factory=list)
    summaries: List[DoubleDescentSummary] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)

"""
Pydantic models and array containers for the linear measurement model.

The system is y = A_S x_S + A_C x_C + v. The estimator sees the shared block A_S,
fake columns A_F, and never the missing block A_C.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.errors import InvalidSpecError
from src.core.services.linalg import ThinSvd, thin_svd


class CovarianceKind(str, Enum):
    """Covariance families supported for priors and feature rows"""
    ISOTROPIC = "isotropic"
    DECAYED_EIGEN = "decayed_eigen"


class CovarianceSpec(BaseModel):
    """Covariance family plus its parameters; the dimension comes from context"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: CovarianceKind = Field(CovarianceKind.ISOTROPIC, description="Covariance family")
    scale: float = Field(1.0, description="Isotropic variance c in c*I")
    alpha: float = Field(0.0, description="Eigenvalue decay exponent for decayed_eigen")
    seed: Optional[int] = Field(None, description="Seed of the Haar rotation; None draws it from the caller's stream")

    @classmethod
    def isotropic(cls, scale: float = 1.0) -> "CovarianceSpec":
        return cls(kind=CovarianceKind.ISOTROPIC, scale=scale)

    @classmethod
    def decayed_eigen(cls, alpha: float, seed: Optional[int] = None) -> "CovarianceSpec":
        return cls(kind=CovarianceKind.DECAYED_EIGEN, alpha=alpha, seed=seed)

    @property
    def is_identity(self) -> bool:
        if self.kind == CovarianceKind.ISOTROPIC:
            return self.scale == 1.0
        return self.alpha == 0.0

    def trace(self, dim: int) -> float:
        """Trace of the materialized covariance at dimension `dim`."""
        if self.kind == CovarianceKind.ISOTROPIC:
            return float(self.scale) * dim
        # decayed spectra are normalized to trace dim
        return float(dim)


class ProblemConfig(BaseModel):
    """One point of the experiment design"""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    p_S: int = Field(..., ge=0, description="Shared parameters (known to the estimator)")
    p_C: int = Field(0, ge=0, description="Missing parameters (unknown to the estimator)")
    p_F: int = Field(0, ge=0, description="Fake parameters (assumed but absent)")
    n: int = Field(..., ge=1, description="Number of observations")
    sigma_v2: float = Field(1.0, ge=0, description="True noise variance")
    sigma_hat2: float = Field(0.0, ge=0, description="Assumed noise variance")
    cov_x_S: CovarianceSpec = Field(default_factory=CovarianceSpec, description="Prior of x_S")
    cov_x_C: CovarianceSpec = Field(default_factory=CovarianceSpec, description="Prior of x_C")

    @classmethod
    def build(cls, **fields: Any) -> "ProblemConfig":
        """Validated construction that reports failures as InvalidSpecError."""
        try:
            return cls(**fields)
        except ValidationError as e:
            raise InvalidSpecError(f"invalid problem config: {e}") from e

    def with_updates(self, **changes: Any) -> "ProblemConfig":
        """Copy with some fields replaced, re-validated."""
        return self.build(**{**self.model_dump(), **changes})

    @property
    def p(self) -> int:
        return self.p_S + self.p_C

    @property
    def p_bar(self) -> int:
        return self.p_S + self.p_F

    @property
    def trace_x_S(self) -> float:
        return self.cov_x_S.trace(self.p_S)

    @property
    def trace_x_C(self) -> float:
        return self.cov_x_C.trace(self.p_C)

    @property
    def trace_x(self) -> float:
        return self.trace_x_S + self.trace_x_C


class FeatureCovariance(BaseModel):
    """Row covariances of the feature matrices: [A_S, A_C] over p, A_F over p_F"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    shared: CovarianceSpec = Field(default_factory=CovarianceSpec, description="Row covariance K_a of [A_S, A_C]")
    fake: CovarianceSpec = Field(default_factory=CovarianceSpec, description="Row covariance K_aF of A_F")

    @property
    def is_isotropic_identity(self) -> bool:
        """True when both blocks are I (a rotated flat spectrum counts)"""
        return all(spec.is_identity for spec in (self.shared, self.fake))


@dataclass(frozen=True, eq=False)
class MaterializedCovariance:
    """Dense covariance with a cached square-root factor (factor @ factor.T == matrix)"""

    matrix: np.ndarray
    factor: np.ndarray
    eigenvalues: np.ndarray

    @classmethod
    def empty(cls) -> "MaterializedCovariance":
        return cls(matrix=np.zeros((0, 0)), factor=np.zeros((0, 0)), eigenvalues=np.zeros(0))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


@dataclass(frozen=True, eq=False)
class Priors:
    """Materialized priors of the shared and missing unknowns"""

    K_x_S: MaterializedCovariance
    K_x_C: MaterializedCovariance


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """One realization of the feature blocks, with a lazily cached SVD of A_bar"""

    A_S: np.ndarray
    A_C: np.ndarray
    A_F: np.ndarray

    @property
    def n(self) -> int:
        return int(self.A_S.shape[0])

    @property
    def p_S(self) -> int:
        return int(self.A_S.shape[1])

    @property
    def p_C(self) -> int:
        return int(self.A_C.shape[1])

    @property
    def p_F(self) -> int:
        return int(self.A_F.shape[1])

    @cached_property
    def A_bar(self) -> np.ndarray:
        """Assumed model matrix [A_S, A_F]"""
        return np.hstack([self.A_S, self.A_F])

    @cached_property
    def A_tilde(self) -> np.ndarray:
        """True model matrix [A_S, A_C]"""
        return np.hstack([self.A_S, self.A_C])

    @cached_property
    def svd(self) -> ThinSvd:
        return thin_svd(self.A_bar)


@dataclass(frozen=True, eq=False)
class UnknownsDraw:
    """Draw(s) of x_S, x_C and v; 1-D for one draw, rows are draws when 2-D"""

    x_S: np.ndarray
    x_C: np.ndarray
    v: np.ndarray
    batched: bool = field(default=False)

    @property
    def count(self) -> int:
        return int(self.v.shape[0]) if self.batched else 1

"""Configuration management for the misspecified-LMMSE lab.

This module provides centralized configuration management using Pydantic Settings,
holding the process-wide defaults every experiment falls back to when its own
config file leaves a value out.
"""

from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # =============================================================================
    # Application Settings
    # =============================================================================
    app_name: str = Field(default="misspec-lmmse-lab", description="Application name")
    app_version: str = Field(default="1.0.0", description="Application version")
    log_level: str = Field(default="INFO", description="Logging level")
    debug: bool = Field(default=False, description="Enable debug mode")

    # =============================================================================
    # Simulation Defaults
    # =============================================================================
    default_master_seed: int = Field(default=20220601, ge=0, description="Master seed used when a config omits one")
    default_threads: int = Field(default=1, ge=1, description="Worker threads for Monte Carlo realizations")
    realizations_features: int = Field(default=100, ge=1, description="M_r: feature-matrix realizations per cell")
    realizations_unknowns: int = Field(default=100, ge=1, description="M_u: unknown/noise draws per feature realization")
    num_spectra: int = Field(default=200, ge=2, description="Sampled Wishart spectra per spectral-moment estimate")
    test_points: int = Field(default=200, ge=0, description="Held-out test rows for the output-error estimate")
    moment_batch_size: int = Field(default=2000, ge=1, description="Draws per batch in the sampling oracles")

    # =============================================================================
    # Validation Suite
    # =============================================================================
    validation_draws: int = Field(default=100_000, ge=100, description="Draws per sampling oracle (full suite)")
    validation_quick_draws: int = Field(default=10_000, ge=100, description="Draws per sampling oracle (--quick)")
    validation_sigmas: float = Field(default=3.0, gt=0, description="Pass band in standard errors (full suite)")
    validation_quick_sigmas: float = Field(default=4.0, gt=0, description="Pass band in standard errors (--quick)")

    # =============================================================================
    # Output
    # =============================================================================
    csv_significant_digits: int = Field(default=17, ge=1, le=17, description="Significant digits of floats in CSV output")
    output_dir: Path = Field(default=Path("results"), description="Default directory for CSV and manifest output")

    # =============================================================================
    # Validators
    # =============================================================================
    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        allowed_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in allowed_levels:
            raise ValueError(f"log_level must be one of {allowed_levels}")
        return v.upper()

    model_config = SettingsConfigDict(
        env_prefix="LMMSE_LAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        validate_assignment=True,
        use_enum_values=True,
    )

    @property
    def csv_float_format(self) -> str:
        """printf-style float format matching csv_significant_digits"""
        return f"%.{self.csv_significant_digits}g"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Global settings instance
settings = get_settings()

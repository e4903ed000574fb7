"""
Closed-form error expressions.
"""

from .schema import FakeCountOptimum, MomentMethod, MseBreakdown, Provenance, Regime, SpectralMoments
from .services import (
    analytic_breakdown,
    classify_regime,
    moments_large_n,
    mse_fake,
    mse_large_n,
    mse_limit_pf_infinity,
    mse_min_norm,
    mse_output,
    mse_ridge,
    optimal_fake_count,
    optimal_sigma_hat,
    pf_infinity_beats_pf_zero,
    pf_infinity_threshold,
)

__all__ = [
    "FakeCountOptimum",
    "MomentMethod",
    "MseBreakdown",
    "Provenance",
    "Regime",
    "SpectralMoments",
    "analytic_breakdown",
    "classify_regime",
    "moments_large_n",
    "mse_fake",
    "mse_large_n",
    "mse_limit_pf_infinity",
    "mse_min_norm",
    "mse_output",
    "mse_ridge",
    "optimal_fake_count",
    "optimal_sigma_hat",
    "pf_infinity_beats_pf_zero",
    "pf_infinity_threshold",
]

"""
Misspecified and oracle LMMSE estimators.
"""

from .schema import ConditionalMse, Estimate, MisspecifiedEstimator, SolveRoute
from .services import (
    build_misspecified,
    build_misspecified_direct,
    build_misspecified_general,
    build_oracle,
    conditional_mse,
    conditional_prediction_mse,
    estimate,
    oracle_conditional_mse,
)

__all__ = [
    "ConditionalMse",
    "Estimate",
    "MisspecifiedEstimator",
    "SolveRoute",
    "build_misspecified",
    "build_misspecified_direct",
    "build_misspecified_general",
    "build_oracle",
    "conditional_mse",
    "conditional_prediction_mse",
    "estimate",
    "oracle_conditional_mse",
]

"""
Linear measurement model: configurations, covariances and samplers.
"""

from .schema import (
    CovarianceKind,
    CovarianceSpec,
    FeatureCovariance,
    FeatureSet,
    MaterializedCovariance,
    Priors,
    ProblemConfig,
    UnknownsDraw,
)
from .services import (
    FeatureFactors,
    decayed_spectrum,
    generate_observations,
    materialize_covariance,
    materialize_priors,
    sample_features,
    sample_unknowns,
    sample_unknowns_batch,
)

__all__ = [
    "CovarianceKind",
    "CovarianceSpec",
    "FeatureCovariance",
    "FeatureFactors",
    "FeatureSet",
    "MaterializedCovariance",
    "Priors",
    "ProblemConfig",
    "UnknownsDraw",
    "decayed_spectrum",
    "generate_observations",
    "materialize_covariance",
    "materialize_priors",
    "sample_features",
    "sample_unknowns",
    "sample_unknowns_batch",
]

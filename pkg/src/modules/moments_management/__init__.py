"""
Random-matrix identities, spectral moments and their sampling oracles.
"""

from .oracles import (
    haar_entry_statistics,
    haar_first_column_chi2,
    haar_orthogonality_error,
    oracle_gaussian_sandwich,
    oracle_haar_fourth_moments,
    oracle_pinv_gram_trace,
    oracle_q_expectation,
)
from .schema import (
    DistributionCheck,
    HaarFourthMoments,
    OracleCheck,
    QExpectation,
    SandwichExpectation,
    SpectrumSample,
)
from .services import (
    bulk_edge_outlier_fraction,
    estimate_moments,
    estimate_moments_grid,
    expected_pinv_gram_trace,
    gaussian_sandwich_trace,
    haar_fourth_moments,
    moment_terms,
    q_expectation,
    sample_spectra,
    sample_spectrum,
    spectrum_symmetry_error,
)

__all__ = [
    "DistributionCheck",
    "HaarFourthMoments",
    "OracleCheck",
    "QExpectation",
    "SandwichExpectation",
    "SpectrumSample",
    "bulk_edge_outlier_fraction",
    "estimate_moments",
    "estimate_moments_grid",
    "expected_pinv_gram_trace",
    "gaussian_sandwich_trace",
    "haar_entry_statistics",
    "haar_first_column_chi2",
    "haar_fourth_moments",
    "haar_orthogonality_error",
    "moment_terms",
    "oracle_gaussian_sandwich",
    "oracle_haar_fourth_moments",
    "oracle_pinv_gram_trace",
    "oracle_q_expectation",
    "q_expectation",
    "sample_spectra",
    "sample_spectrum",
    "spectrum_symmetry_error",
]

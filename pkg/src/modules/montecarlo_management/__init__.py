"""
Monte Carlo experiment protocols.
"""

from .schema import (
    AxisKind,
    CellEstimate,
    CellResult,
    CovarianceExperimentResult,
    CovariancePairResult,
    RotationPolicy,
    SamplingMode,
    SigmaSweepResult,
    SweepAxis,
    SweepPlan,
    SweepResult,
)
from .services import (
    DEFAULT_COVARIANCE_PAIRS,
    CellRunner,
    cell_streams,
    run_cell,
    run_covariance_experiment,
    run_decomposition_sweep,
    run_sigma_sweep,
    run_sweep,
)

__all__ = [
    "AxisKind",
    "CellEstimate",
    "CellResult",
    "CellRunner",
    "CovarianceExperimentResult",
    "CovariancePairResult",
    "DEFAULT_COVARIANCE_PAIRS",
    "RotationPolicy",
    "SamplingMode",
    "SigmaSweepResult",
    "SweepAxis",
    "SweepPlan",
    "SweepResult",
    "cell_streams",
    "run_cell",
    "run_covariance_experiment",
    "run_decomposition_sweep",
    "run_sigma_sweep",
    "run_sweep",
]

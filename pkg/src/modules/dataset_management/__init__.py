"""
Real-data double-descent sweeps.
"""

from .schema import (
    ColumnOrder,
    DatasetProvenance,
    DoubleDescentSummary,
    RealDataSweepPlan,
    RealDataSweepResult,
    TabularDataset,
    WidthPoint,
)
from .services import (
    PLANTED_RESPONSE,
    WidthSweepRunner,
    generate_planted_dataset,
    ingest_csv,
    ridge_estimate,
    run_realdata_sweep,
    summarize_double_descent,
    write_planted_csv,
)

__all__ = [
    "ColumnOrder",
    "DatasetProvenance",
    "DoubleDescentSummary",
    "PLANTED_RESPONSE",
    "RealDataSweepPlan",
    "RealDataSweepResult",
    "TabularDataset",
    "WidthPoint",
    "WidthSweepRunner",
    "generate_planted_dataset",
    "ingest_csv",
    "ridge_estimate",
    "run_realdata_sweep",
    "summarize_double_descent",
    "write_planted_csv",
]

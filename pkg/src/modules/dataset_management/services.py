"""
Real-data double-descent sweep: CSV ingestion, repeated splits, width sweep.
"""

import hashlib
import io
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg

from src.core.errors import IngestionError, InvalidInputError
from src.core.services.linalg import shrinkage_inverse, thin_svd
from src.core.services.random import StreamFactory, StreamPurpose
from src.core.services.stats import RunningMoments
from src.core.settings.logging import logger
from src.modules.analytic_management.services import classify_regime
from src.modules.dataset_management.schema import (
    ColumnOrder,
    DatasetProvenance,
    DoubleDescentSummary,
    RealDataSweepPlan,
    RealDataSweepResult,
    TabularDataset,
    WidthPoint,
)
from src.modules.estimator_management.schema import SolveRoute
from src.modules.model_management.schema import ProblemConfig
from src.modules.model_management.services import generate_observations, sample_features, sample_unknowns

PLANTED_RESPONSE = "y"


def ingest_csv(path: Union[str, Path], response_column: str) -> TabularDataset:
    """
    Read a comma-delimited table with a header row.

    Args:
        path: CSV file
        response_column: Name of the response column

    Returns:
        TabularDataset over all numeric non-response columns, rows with
        non-finite values removed
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IngestionError(f"cannot read {path}: {e}") from e
    digest = hashlib.sha256(raw).hexdigest()

    try:
        frame = pd.read_csv(io.BytesIO(raw))
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestionError(f"cannot parse {path}: {e}") from e

    if response_column not in frame.columns:
        raise IngestionError(f"response column missing from {path}", column=response_column)

    response = pd.to_numeric(frame[response_column], errors="coerce")
    non_numeric = response.isna() & frame[response_column].notna()
    if non_numeric.any():
        first = int(np.flatnonzero(non_numeric.to_numpy())[0])
        raise IngestionError(
            f"non-numeric response value {frame[response_column].iloc[first]!r}", row=first + 1, column=response_column
        )

    candidates = frame.drop(columns=[response_column])
    numeric = candidates.select_dtypes(include="number")
    dropped = [str(c) for c in candidates.columns if c not in numeric.columns]
    if dropped:
        logger.warning(f"ignoring non-numeric columns in {path.name}: {dropped}")

    features = numeric.to_numpy(dtype=float)
    target = response.to_numpy(dtype=float)
    keep = np.isfinite(target) & np.all(np.isfinite(features), axis=1)
    rejected = int(keep.size - np.count_nonzero(keep))
    if rejected:
        logger.warning(f"rejected {rejected} of {keep.size} rows with non-finite values in {path.name}")
    if not keep.any():
        raise IngestionError(f"no usable rows in {path}")
    if numeric.shape[1] == 0:
        raise IngestionError(f"no numeric feature columns in {path}")

    provenance = DatasetProvenance(
        source_path=str(path),
        sha256=digest,
        total_rows=int(keep.size),
        rejected_rows=rejected,
        dropped_columns=dropped,
    )
    try:
        return TabularDataset(
            features=features[keep],
            response=target[keep],
            column_names=[str(c) for c in numeric.columns],
            provenance=provenance,
        )
    except InvalidInputError as e:
        raise IngestionError(str(e)) from e


def generate_planted_dataset(
    N: int, P: int, signal_features: int, sigma_v2: float, rng: np.random.Generator
) -> pd.DataFrame:
    """
    Synthetic table drawn from the linear model.

    The first `signal_features` columns carry x ~ N(0, I); the remaining
    columns are irrelevant to the response.
    """
    if not 0 <= signal_features <= P:
        raise InvalidInputError(f"signal_features must lie in [0, P], got {signal_features}")
    config = ProblemConfig.build(p_S=signal_features, p_F=P - signal_features, n=N, sigma_v2=sigma_v2)
    features = sample_features(config, rng)
    response = generate_observations(features, sample_unknowns(config, rng))
    columns = [f"f{j + 1:04d}" for j in range(P)]
    frame = pd.DataFrame(features.A_bar, columns=columns)
    frame[PLANTED_RESPONSE] = response
    return frame


def write_planted_csv(
    path: Union[str, Path], N: int, P: int, signal_features: int, sigma_v2: float, rng: np.random.Generator
) -> Path:
    """Write generate_planted_dataset to `path` and return it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    generate_planted_dataset(N, P, signal_features, sigma_v2, rng).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"wrote planted dataset N={N} P={P} signal={signal_features} to {path}")
    return path


def ridge_estimate(A: np.ndarray, y: np.ndarray, sigma_hat2: float, route: SolveRoute = SolveRoute.OBSERVATION_SPACE) -> np.ndarray:
    """x = A^T (A A^T + sigma_hat2 I_n)^+ y through either solve route."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if sigma_hat2 < 0 or not np.isfinite(sigma_hat2):
        raise InvalidInputError(f"sigma_hat2 must be finite and non-negative, got {sigma_hat2}")
    if sigma_hat2 == 0:
        return shrinkage_inverse(thin_svd(A), 0.0) @ y
    n, p_bar = A.shape
    if route == SolveRoute.OBSERVATION_SPACE:
        return A.T @ scipy.linalg.solve(A @ A.T + sigma_hat2 * np.eye(n), y, assume_a="pos")
    return scipy.linalg.solve(A.T @ A + sigma_hat2 * np.eye(p_bar), A.T @ y, assume_a="pos")


def split_indices(N: int, train_count: int, test_count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Uniformly random disjoint train/test index sets."""
    order = rng.permutation(N)
    return order[:train_count], order[train_count : train_count + test_count]


def column_order(P: int, policy: ColumnOrder, rng: np.random.Generator) -> np.ndarray:
    if policy == ColumnOrder.SHUFFLED:
        return rng.permutation(P)
    return np.arange(P)


def _kernel_coefficients(eigenvalues: np.ndarray, eigenvectors: np.ndarray, y: np.ndarray,
                         sigma_hat2: float, rank: int) -> np.ndarray:
    """(G + sigma_hat2 I)^+ y from the eigendecomposition of the n x n Gram matrix G."""
    w = np.clip(eigenvalues, 0.0, None)
    if sigma_hat2 == 0:
        inverse = np.zeros_like(w)
        cutoff = w.size * np.finfo(float).eps * (w[-1] if w.size else 0.0)
        top = np.zeros_like(w, dtype=bool)
        top[w.size - rank :] = True
        keep = top & (w > cutoff)
        inverse[keep] = 1.0 / w[keep]
    else:
        inverse = 1.0 / (w + sigma_hat2)
    return eigenvectors @ (inverse * (eigenvectors.T @ y))


class WidthSweepRunner:
    """Runs single experiments of a width sweep; experiment i uses streams keyed by i."""

    def __init__(self, data: TabularDataset, plan: RealDataSweepPlan, streams: StreamFactory):
        plan.validate_for(data)
        self.data = data
        self.plan = plan
        self.streams = streams

    def experiment(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Test error and training residual, each of shape (widths, sigmas)."""
        plan, data = self.plan, self.data
        train, test = split_indices(data.N, plan.train_count, plan.test_count,
                                    self.streams.generator(StreamPurpose.SPLITS, index))
        columns = column_order(data.P, plan.column_order, self.streams.generator(StreamPurpose.COLUMNS, index))
        max_width = plan.width_axis[-1]
        X_train = data.features[np.ix_(train, columns[:max_width])]
        X_test = data.features[np.ix_(test, columns[:max_width])]
        if plan.standardize:
            center = X_train.mean(axis=0)
            scale = X_train.std(axis=0)
            scale[scale == 0] = 1.0
            X_train = (X_train - center) / scale
            X_test = (X_test - center) / scale
        y_train, y_test = data.response[train], data.response[test]

        n = plan.train_count
        gram = np.zeros((n, n))
        cross = np.zeros((plan.test_count, n))
        test_error = np.empty((len(plan.width_axis), len(plan.sigma_hat2_values)))
        train_residual = np.empty_like(test_error)
        previous = 0
        for w_index, width in enumerate(plan.width_axis):
            block_train = X_train[:, previous:width]
            gram += block_train @ block_train.T
            cross += X_test[:, previous:width] @ block_train.T
            previous = width
            eigenvalues, eigenvectors = scipy.linalg.eigh(gram)
            for s_index, sigma_hat2 in enumerate(plan.sigma_hat2_values):
                coef = _kernel_coefficients(eigenvalues, eigenvectors, y_train, sigma_hat2, min(n, width))
                test_error[w_index, s_index] = np.mean(np.square(y_test - cross @ coef))
                train_residual[w_index, s_index] = np.mean(np.square(y_train - gram @ coef))
        return test_error, train_residual

    def run(self) -> Tuple[RunningMoments, RunningMoments]:
        shape = (len(self.plan.width_axis), len(self.plan.sigma_hat2_values))
        errors, residuals = RunningMoments(shape), RunningMoments(shape)
        chunk = max(1, 4 * self.plan.threads)
        with ThreadPoolExecutor(max_workers=self.plan.threads) as executor:
            for start in range(0, self.plan.repeats, chunk):
                indices = range(start, min(start + chunk, self.plan.repeats))
                for test_error, train_residual in executor.map(self.experiment, indices):
                    errors.push(test_error)
                    residuals.push(train_residual)
        return errors, residuals


def summarize_double_descent(
    widths: Sequence[int], errors: Sequence[float], train_count: int, sigma_hat2: Optional[float] = None
) -> DoubleDescentSummary:
    """
    Locate the error peak and the global minimum of a width curve.

    Args:
        widths: p_bar values, increasing
        errors: Mean test error per width
        train_count: n, the interpolation threshold
        sigma_hat2: Assumed noise the curve was computed with (informational)

    Returns:
        DoubleDescentSummary
    """
    widths = [int(w) for w in widths]
    values = np.asarray(errors, dtype=float)
    if len(widths) != values.size:
        raise InvalidInputError("widths and errors differ in length")
    if len(widths) < 3 or min(widths) >= train_count or max(widths) <= train_count:
        raise InvalidInputError(
            f"need at least 3 widths on both sides of n={train_count}, got {len(widths)} in "
            f"[{min(widths, default=0)}, {max(widths, default=0)}]"
        )
    peak = int(np.argmax(values))
    best = int(np.argmin(values))
    under = values[np.asarray(widths) < train_count]
    return DoubleDescentSummary(
        sigma_hat2=sigma_hat2,
        train_count=train_count,
        peak_width=widths[peak],
        global_min_width=widths[best],
        min_error=float(values[best]),
        underparam_min_error=float(under.min()) if under.size else None,
        overparam_global_min=widths[best] > train_count,
    )


def run_realdata_sweep(data: TabularDataset, plan: RealDataSweepPlan) -> RealDataSweepResult:
    """
    Average held-out prediction error per (width, sigma_hat2) over repeated splits.

    Args:
        data: Ingested dataset
        plan: Sweep plan, validated against the data shape

    Returns:
        RealDataSweepResult with one point per (width, sigma_hat2) and a
        double-descent summary per sigma_hat2 when the axis spans both regimes
    """
    logger.info(
        f"width sweep: N={data.N} P={data.P} n={plan.train_count} n*={plan.test_count} "
        f"widths={len(plan.width_axis)} repeats={plan.repeats}"
    )
    if not plan.width_axis:
        return RealDataSweepResult(metadata=_sweep_metadata(data, plan))

    runner = WidthSweepRunner(data, plan, StreamFactory(plan.master_seed))
    errors, residuals = runner.run()
    stderr = errors.stderr

    points: List[WidthPoint] = []
    for w_index, width in enumerate(plan.width_axis):
        for s_index, sigma_hat2 in enumerate(plan.sigma_hat2_values):
            se = float(stderr[w_index, s_index])
            points.append(
                WidthPoint(
                    width=width,
                    sigma_hat2=sigma_hat2,
                    mean_error=float(errors.mean[w_index, s_index]),
                    stderr=se if np.isfinite(se) else None,
                    mean_train_residual=float(residuals.mean[w_index, s_index]),
                    regime=classify_regime(plan.train_count, width),
                )
            )

    summaries = []
    for s_index, sigma_hat2 in enumerate(plan.sigma_hat2_values):
        try:
            summaries.append(
                summarize_double_descent(plan.width_axis, errors.mean[:, s_index], plan.train_count, sigma_hat2)
            )
        except InvalidInputError as e:
            logger.warning(f"no double-descent summary for sigma_hat2={sigma_hat2:g}: {e}")

    return RealDataSweepResult(points=points, summaries=summaries, metadata=_sweep_metadata(data, plan))


def _sweep_metadata(data: TabularDataset, plan: RealDataSweepPlan) -> dict:
    return {
        "column_order": plan.column_order.value,
        "standardize": plan.standardize,
        "repeats": plan.repeats,
        "regularizer": "sigma_hat2 * I_n",
        "dataset_sha256": data.provenance.sha256 if data.provenance else None,
        "rejected_rows": data.provenance.rejected_rows if data.provenance else 0,
    }

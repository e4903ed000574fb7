"""
Monte Carlo protocols: empirical expected MSE per cell, and sweeps over
fake-feature count, assumed noise, sample count and feature covariance.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import InvalidInputError, LabError
from src.core.services.random import StreamFactory, StreamPurpose
from src.core.services.stats import RunningMoments
from src.core.settings.config import settings
from src.core.settings.logging import logger
from src.modules.analytic_management.schema import MseBreakdown, Regime, SpectralMoments
from src.modules.analytic_management.services import (
    analytic_breakdown,
    classify_regime,
    mse_ridge,
    optimal_sigma_hat,
)
from src.modules.estimator_management.services import (
    build_misspecified,
    conditional_mse,
    conditional_prediction_mse,
    estimate,
)
from src.modules.model_management.schema import CovarianceSpec, FeatureCovariance, FeatureSet, Priors, ProblemConfig
from src.modules.model_management.services import (
    FeatureFactors,
    describe,
    generate_observations,
    materialize_priors,
    sample_features,
    sample_unknowns_batch,
)
from src.modules.moments_management.services import estimate_moments_grid
from src.modules.montecarlo_management.schema import (
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

# top-level stream branches under the master seed
_CELLS = 0
_PLAN_SPECTRA = 1
_COVARIANCE_SEEDS = 2

DEFAULT_COVARIANCE_PAIRS: Tuple[Tuple[float, float], ...] = ((0.0, 0.0), (0.0, 20.0), (1.0, 0.0), (1.0, 20.0))

# per-realization vector layout: J, J_S, J_C, J_F, J_y (held-out), J_y decomposed
_COMPONENTS = 6


def cell_streams(master_seed: int, cell_index: int) -> StreamFactory:
    """Stream factory of one sweep cell."""
    return StreamFactory(master_seed).child(_CELLS, cell_index)


class CellRunner:
    """
    Runs the realizations of one cell.

    Realization i draws its features, unknowns and held-out rows from
    streams keyed by (purpose, i), so the result does not depend on which
    worker runs it or in what order.
    """

    def __init__(
        self,
        config: ProblemConfig,
        M_r: int,
        M_u: int,
        mode: SamplingMode,
        streams: StreamFactory,
        test_points: int = 0,
        feature_cov: Optional[FeatureCovariance] = None,
        rotation_policy: RotationPolicy = RotationPolicy.PER_EXPERIMENT,
        priors: Optional[Priors] = None,
    ):
        if M_r < 1 or M_u < 1:
            raise InvalidInputError(f"M_r and M_u must be positive, got M_r={M_r}, M_u={M_u}")
        if test_points < 0:
            raise InvalidInputError(f"test_points must be non-negative, got {test_points}")
        self.config = config
        self.M_r = M_r
        self.M_u = M_u
        self.mode = SamplingMode(mode)
        self.streams = streams
        self.test_points = test_points
        self.priors = priors or materialize_priors(config, streams.generator(StreamPurpose.COVARIANCE, 0))
        self.feature_cov = None if feature_cov is None or feature_cov.is_isotropic_identity else feature_cov
        self.rotation_policy = rotation_policy
        self.shared_factors: Optional[FeatureFactors] = None
        if self.feature_cov is not None and rotation_policy == RotationPolicy.PER_EXPERIMENT:
            self.shared_factors = FeatureFactors(config, self.feature_cov, streams.generator(StreamPurpose.COVARIANCE, 1))

    def _factors(self, index: int) -> Optional[FeatureFactors]:
        if self.feature_cov is None:
            return None
        if self.shared_factors is not None:
            return self.shared_factors
        return FeatureFactors(self.config, self.feature_cov, self.streams.generator(StreamPurpose.COVARIANCE, 2, index))

    def realization(self, index: int) -> np.ndarray:
        """Error components J^(i) of realization `index`."""
        config = self.config
        factors = self._factors(index)
        features = sample_features(config, self.streams.generator(StreamPurpose.FEATURES, index), factors=factors)
        estimator = build_misspecified(features, config.sigma_hat2)

        test: Optional[FeatureSet] = None
        held_out_rng = self.streams.generator(StreamPurpose.HELD_OUT, index)
        if self.test_points:
            test = sample_features(config, held_out_rng, factors=factors, rows=self.test_points)

        if self.mode == SamplingMode.CONDITIONAL_TRACE:
            cm = conditional_mse(estimator, features, self.priors.K_x_S.matrix, self.priors.K_x_C.trace, config.sigma_v2)
            J_S, J_C, J_F = cm.eps_S, cm.eps_C, cm.eps_F
            J_y = np.nan
            if test is not None:
                K_x_C = self.priors.K_x_C.matrix if config.p_C else None
                J_y = conditional_prediction_mse(estimator, features, test, self.priors.K_x_S.matrix, K_x_C, config.sigma_v2)
        else:
            draw = sample_unknowns_batch(config, self.M_u, self.streams.generator(StreamPurpose.UNKNOWNS, index), self.priors)
            x_hat = estimate(estimator, generate_observations(features, draw))
            J_S = float(np.mean(np.sum(np.square(draw.x_S - x_hat.x_S_hat), axis=1)))
            J_C = float(np.mean(np.sum(np.square(draw.x_C), axis=1)))
            J_F = float(np.mean(np.sum(np.square(x_hat.x_F_hat), axis=1)))
            J_y = np.nan
            if test is not None:
                noise = np.sqrt(config.sigma_v2) * held_out_rng.standard_normal((self.M_u, self.test_points))
                truth = draw.x_S @ test.A_S.T + draw.x_C @ test.A_C.T + noise
                prediction = x_hat.x_S_hat @ test.A_S.T + x_hat.x_F_hat @ test.A_F.T
                J_y = float(np.mean(np.square(truth - prediction)))

        return np.array([J_S + J_C, J_S, J_C, J_F, J_y, J_S + J_C + J_F + config.sigma_v2])

    def run(self, threads: int = 1) -> CellEstimate:
        start = time.perf_counter()
        if threads <= 1:
            rows = [self.realization(i) for i in range(self.M_r)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                rows = list(executor.map(self.realization, range(self.M_r)))

        acc = RunningMoments(_COMPONENTS)
        acc.update(np.vstack(rows))
        mean = acc.mean
        stderr = acc.stderr

        def se(k: int) -> Optional[float]:
            value = float(stderr[k])
            return value if np.isfinite(value) else None

        held_out = bool(self.test_points)
        return CellEstimate(
            eps_hat=float(mean[0]),
            eps_stderr=se(0),
            eps_S_hat=float(mean[1]),
            eps_S_stderr=se(1),
            eps_C_hat=float(mean[2]),
            eps_C_stderr=se(2),
            eps_F_hat=float(mean[3]),
            eps_F_stderr=se(3),
            eps_y_hat=float(mean[4]) if held_out else None,
            eps_y_stderr=se(4) if held_out else None,
            eps_y_decomposed=float(mean[5]),
            eps_y_decomposed_stderr=se(5),
            M_r=self.M_r,
            M_u=self.M_u if self.mode == SamplingMode.FULL_SAMPLING else None,
            mode=self.mode,
            test_points=self.test_points,
            wall_time_s=time.perf_counter() - start,
        )


def run_cell(
    config: ProblemConfig,
    M_r: int,
    M_u: int,
    mode: SamplingMode,
    streams: StreamFactory,
    test_points: int = 0,
    feature_cov: Optional[FeatureCovariance] = None,
    rotation_policy: RotationPolicy = RotationPolicy.PER_EXPERIMENT,
    threads: int = 1,
) -> CellEstimate:
    """
    Empirical expected MSE of one design point.

    Args:
        config: Design point
        M_r: Feature realizations
        M_u: Unknown/noise draws per feature realization (full_sampling only)
        mode: full_sampling or conditional_trace
        streams: Stream factory of the cell
        test_points: Held-out rows for the output error (0 disables)
        feature_cov: Feature row covariances (None is standard Gaussian)
        rotation_policy: Redraw policy of Haar rotations in feature_cov
        threads: Worker threads across realizations

    Returns:
        CellEstimate with means and standard errors over realizations
    """
    runner = CellRunner(config, M_r, M_u, mode, streams, test_points, feature_cov, rotation_policy)
    return runner.run(threads)


def _analytic_companion(
    config: ProblemConfig, plan: SweepPlan, moments: Optional[SpectralMoments], streams: StreamFactory
) -> Optional[MseBreakdown]:
    """Closed-form prediction for a cell, when one applies to its feature law."""
    if plan.feature_cov is not None and not plan.feature_cov.is_isotropic_identity:
        return None
    args = (config.p_S, config.p_F, config.n, config.trace_x_S, config.trace_x_C, config.sigma_v2)
    if config.sigma_hat2 == 0:
        return analytic_breakdown(*args)
    if config.p_bar <= 1:
        return None
    if moments is None:
        moments = estimate_moments_grid(
            config.n, config.p_bar, [config.sigma_hat2], config.p_S, plan.num_spectra,
            streams.child(StreamPurpose.SPECTRA), plan.threads,
        )[0]
    try:
        return mse_ridge(*args, moments)
    except LabError as e:
        logger.warning(f"no analytic companion for sigma_hat2={config.sigma_hat2:g}: {e}")
        return None


def _plan_moments(plan: SweepPlan) -> dict:
    """One shared set of spectra for every assumed-noise cell of an assumed-noise sweep."""
    base = plan.base
    if plan.axis.kind != AxisKind.ASSUMED_NOISE or base.p_bar <= 1:
        return {}
    positive = [v for v in plan.axis.values if v > 0]
    if not positive:
        return {}
    spectra_streams = StreamFactory(plan.master_seed).child(_PLAN_SPECTRA)
    moments = estimate_moments_grid(base.n, base.p_bar, positive, base.p_S, plan.num_spectra, spectra_streams, plan.threads)
    return {float(m.sigma_hat2): m for m in moments}


def run_sweep(plan: SweepPlan) -> SweepResult:
    """
    Run one cell per axis value and pair each with its analytic prediction.

    Cell k draws everything from StreamFactory(master_seed).child(0, k).
    """
    values = plan.axis.values
    logger.info(f"sweep over {plan.axis.kind.value} with {len(values)} cells (M_r={plan.M_r}, mode={plan.mode.value})")
    shared_moments = _plan_moments(plan)
    cells: List[CellResult] = []
    start = time.perf_counter()

    for index, value in enumerate(values):
        config = plan.axis.apply(plan.base, value)
        streams = cell_streams(plan.master_seed, index)
        regime = classify_regime(config.n, config.p_bar)
        if regime == Regime.NEAR_THRESHOLD:
            logger.warning(f"cell {index} ({plan.axis.field_name}={value:g}) is near the interpolation threshold")

        cell_estimate = run_cell(
            config, plan.M_r, plan.M_u, plan.mode, streams, plan.test_points,
            plan.feature_cov, plan.rotation_policy, plan.threads,
        )
        analytic = _analytic_companion(config, plan, shared_moments.get(float(config.sigma_hat2)), streams)
        cells.append(CellResult(axis_value=value, config=config, estimate=cell_estimate, analytic=analytic, regime=regime))
        logger.debug(f"cell {index}: {describe(config)} eps_hat={cell_estimate.eps_hat:.6g}")

    logger.info(f"sweep finished in {time.perf_counter() - start:.2f}s")
    return SweepResult(
        plan=plan,
        cells=cells,
        metadata={"test_points": plan.test_points, "rotation_policy": plan.rotation_policy.value, "label": plan.label},
    )


def run_sigma_sweep(
    config: ProblemConfig,
    sigma_axis: Sequence[float],
    M_r: int,
    M_u: int,
    mode: SamplingMode = SamplingMode.FULL_SAMPLING,
    master_seed: Optional[int] = None,
    threads: int = 1,
    num_spectra: Optional[int] = None,
) -> SigmaSweepResult:
    """Sweep the assumed noise variance and report the empirical argmin."""
    plan = SweepPlan(
        base=config,
        axis=SweepAxis(kind=AxisKind.ASSUMED_NOISE, values=list(sigma_axis)),
        M_r=M_r,
        M_u=M_u,
        mode=mode,
        master_seed=settings.default_master_seed if master_seed is None else master_seed,
        threads=threads,
        num_spectra=num_spectra or settings.num_spectra,
    )
    sweep = run_sweep(plan)

    argmin_value: Optional[float] = None
    argmin_eps: Optional[float] = None
    if sweep.cells:
        best = min(sweep.cells, key=lambda cell: cell.estimate.eps_hat)
        argmin_value, argmin_eps = best.axis_value, best.estimate.eps_hat

    optimum: Optional[float] = None
    if config.trace_x_S > 0:
        optimum = optimal_sigma_hat(config.p_S, config.trace_x_S, config.trace_x_C, config.sigma_v2)
    logger.info(f"sigma sweep argmin sigma_hat2={argmin_value} (closed-form optimum {optimum}, p_F={config.p_F})")

    return SigmaSweepResult(
        plan=sweep.plan,
        cells=sweep.cells,
        metadata=sweep.metadata,
        argmin_sigma_hat2=argmin_value,
        argmin_eps=argmin_eps,
        optimal_sigma_hat2=optimum,
        optimum_exact=config.p_F == 0,
    )


def run_decomposition_sweep(
    config: ProblemConfig,
    pF_axis: Sequence[int],
    M_r: int,
    M_u: int,
    test_points: int,
    mode: SamplingMode = SamplingMode.FULL_SAMPLING,
    master_seed: Optional[int] = None,
    threads: int = 1,
) -> SweepResult:
    """Fake-count sweep that also estimates the output error on held-out rows."""
    if test_points < 1:
        raise InvalidInputError(f"the decomposition sweep needs test_points >= 1, got {test_points}")
    plan = SweepPlan(
        base=config,
        axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=[float(v) for v in pF_axis]),
        M_r=M_r,
        M_u=M_u,
        mode=mode,
        master_seed=settings.default_master_seed if master_seed is None else master_seed,
        threads=threads,
        test_points=test_points,
    )
    return run_sweep(plan)


def covariance_seed(master_seed: int, slot: int) -> int:
    """Rotation seed held fixed across the cells of one covariance experiment."""
    state = StreamFactory(master_seed).child(_COVARIANCE_SEEDS).seed_sequence(slot).generate_state(1)
    return int(state[0])


def run_covariance_experiment(
    pairs: Optional[Sequence[Tuple[float, float]]],
    config: ProblemConfig,
    pF_axis: Sequence[int],
    M_r: int,
    M_u: int,
    rotation_policy: RotationPolicy = RotationPolicy.PER_EXPERIMENT,
    mode: SamplingMode = SamplingMode.FULL_SAMPLING,
    master_seed: Optional[int] = None,
    threads: int = 1,
) -> CovarianceExperimentResult:
    """
    Fake-count sweeps under decayed feature covariances, one per (alpha, alpha_F) pair.

    With the per_experiment policy each pair's rotations come from a seed fixed
    for the pair, so K_a is the same matrix in every cell of that pair.
    """
    pairs = list(pairs) if pairs else list(DEFAULT_COVARIANCE_PAIRS)
    master_seed = settings.default_master_seed if master_seed is None else master_seed
    results = []
    for index, (alpha, alpha_F) in enumerate(pairs):
        fixed = rotation_policy == RotationPolicy.PER_EXPERIMENT
        feature_cov = FeatureCovariance(
            shared=CovarianceSpec.decayed_eigen(alpha, covariance_seed(master_seed, 2 * index) if fixed else None),
            fake=CovarianceSpec.decayed_eigen(alpha_F, covariance_seed(master_seed, 2 * index + 1) if fixed else None),
        )
        logger.info(f"covariance experiment pair {index}: alpha={alpha:g}, alpha_F={alpha_F:g}")
        plan = SweepPlan(
            base=config,
            axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=[float(v) for v in pF_axis]),
            M_r=M_r,
            M_u=M_u,
            mode=mode,
            master_seed=master_seed,
            threads=threads,
            feature_cov=feature_cov,
            rotation_policy=rotation_policy,
            label=f"alpha={alpha:g},alpha_F={alpha_F:g}",
        )
        results.append(CovariancePairResult(alpha=alpha, alpha_F=alpha_F, sweep=run_sweep(plan)))
    return CovarianceExperimentResult(pairs=results, rotation_policy=rotation_policy)

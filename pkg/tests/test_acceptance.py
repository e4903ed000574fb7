"""Reference cells the lab must reproduce end to end."""

import numpy as np
import pytest

from src.core.services.random import StreamFactory
from src.modules.analytic_management import mse_min_norm, mse_ridge
from src.modules.dataset_management import (
    RealDataSweepPlan,
    TabularDataset,
    generate_planted_dataset,
    run_realdata_sweep,
)
from src.modules.model_management import ProblemConfig
from src.modules.moments_management import estimate_moments
from src.modules.montecarlo_management import (
    AxisKind,
    SamplingMode,
    SweepAxis,
    SweepPlan,
    run_covariance_experiment,
    run_decomposition_sweep,
    run_sigma_sweep,
    run_sweep,
)
from src.modules.validation_management import CheckStatus, SelfValidationService

pytestmark = [pytest.mark.slow, pytest.mark.acceptance]


def _combined(*stderrs: float) -> float:
    return float(np.sqrt(sum(s**2 for s in stderrs)))


def _fake_count_sweep(sigma_v2: float, values) -> list:
    plan = SweepPlan(
        base=ProblemConfig.build(p_S=100, n=200, sigma_v2=sigma_v2),
        axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=values),
        M_r=100,
        M_u=100,
        mode=SamplingMode.FULL_SAMPLING,
        master_seed=20220601,
        num_spectra=20,
    )
    return run_sweep(plan).cells


class TestMinNormCells:
    @pytest.mark.parametrize("sigma_v2", [1.0, 100.0])
    def test_sampled_cells_match_closed_form(self, sigma_v2):
        for cell in _fake_count_sweep(sigma_v2, [0, 20, 60, 300, 1000]):
            gap = abs(cell.estimate.eps_hat - cell.analytic.eps)
            assert gap <= 3 * cell.estimate.eps_stderr, cell.axis_value

    def test_peak_at_threshold(self):
        below, peak, above = (cell.estimate.eps_hat for cell in _fake_count_sweep(100.0, [60, 100, 300]))
        assert peak > 5 * below
        assert peak > 5 * above

    def test_limit_of_many_fake_features(self):
        eps = mse_min_norm(50, 10**6, 200, 50.0, 50.0, 1.0).eps
        assert eps < 100.0
        assert eps > 100.0 * (1 - 5e-4)


class TestAssumedNoise:
    GRID = [s**2 for s in (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 20.0)]

    def test_argmin_near_noise_variance(self):
        config = ProblemConfig.build(p_S=100, n=200, sigma_v2=100.0)
        result = run_sigma_sweep(config, self.GRID, M_r=100, M_u=1, mode=SamplingMode.CONDITIONAL_TRACE,
                                 master_seed=8, num_spectra=20)
        assert result.argmin_sigma_hat2 in (56.25, 100.0, 156.25)
        assert result.optimal_sigma_hat2 == pytest.approx(100.0)

    def test_fake_features_make_zero_best(self):
        config = ProblemConfig.build(p_S=100, p_F=500, n=200, sigma_v2=100.0)
        result = run_sigma_sweep(config, self.GRID, M_r=50, M_u=1, mode=SamplingMode.CONDITIONAL_TRACE,
                                 master_seed=8, num_spectra=20)
        assert result.argmin_sigma_hat2 == 0.0

    @pytest.mark.parametrize("p_bar", [50, 150, 300, 400])
    def test_small_noise_ridge_matches_min_norm(self, p_bar):
        moments = estimate_moments(200, p_bar, 1e-6, 50, 200, StreamFactory(p_bar))
        ridge = mse_ridge(50, p_bar - 50, 200, 50.0, 0.0, 1.0, moments)
        exact = mse_min_norm(50, p_bar - 50, 200, 50.0, 0.0, 1.0)
        assert abs(ridge.eps - exact.eps) <= 3 * ridge.eps_stderr + 1e-5 * exact.eps


class TestIdentities:
    def test_full_validation_suite(self):
        report = SelfValidationService().run()
        assert report.status == CheckStatus.PASSED, [check.name for check in report.failed_checks]

    def test_output_error_decomposition(self):
        (check,) = SelfValidationService().check_decomposition_identity(StreamFactory(3))
        assert check.passed
        assert check.statistic < 1e-12

    def test_solve_routes(self):
        (check,) = SelfValidationService().check_solve_routes(StreamFactory(4))
        assert check.statistic < 1e-8


class TestOutputDecomposition:
    def test_held_out_error_matches_components(self):
        config = ProblemConfig.build(p_S=90, p_C=10, n=200, sigma_v2=100.0)
        result = run_decomposition_sweep(config, [20, 60, 300, 1000], M_r=50, M_u=10, test_points=100,
                                         master_seed=12)
        for cell in result.cells:
            estimate = cell.estimate
            band = 3 * _combined(estimate.eps_y_stderr, estimate.eps_y_decomposed_stderr)
            assert abs(estimate.eps_y_hat - estimate.eps_y_decomposed) <= band, cell.axis_value
            gap = abs(estimate.eps_y_hat - cell.analytic.eps_y)
            assert gap <= 3 * estimate.eps_y_stderr, cell.axis_value


class TestCorrelatedFakeFeatures:
    def test_underparameterized_cells_ignore_fake_covariance(self):
        config = ProblemConfig.build(p_S=50, n=200, sigma_v2=1.0)
        # steep decay leaves larger fake blocks numerically rank deficient
        result = run_covariance_experiment([(0.0, 0.0), (0.0, 20.0)], config, [0, 5, 10], M_r=100, M_u=1,
                                           mode=SamplingMode.CONDITIONAL_TRACE, master_seed=6)
        white, steep = result.pairs
        for first, second in zip(white.sweep.cells, steep.sweep.cells):
            band = 3 * _combined(first.estimate.eps_stderr, second.estimate.eps_stderr)
            assert abs(first.estimate.eps_hat - second.estimate.eps_hat) <= band, first.axis_value
            assert abs(first.estimate.eps_hat - first.analytic.eps) <= 3 * first.estimate.eps_stderr


class TestPlantedDoubleDescent:
    def test_peak_at_training_rows(self):
        frame = generate_planted_dataset(64, 500, 500, 1.0, np.random.default_rng(64))
        data = TabularDataset(features=frame.drop(columns=["y"]).to_numpy(), response=frame["y"].to_numpy())
        plan = RealDataSweepPlan(
            train_count=54,
            test_count=10,
            width_axis=list(range(1, 501)),
            sigma_hat2_values=[0.0],
            repeats=400,
            master_seed=11,
        )
        summary = run_realdata_sweep(data, plan).summaries[0]
        assert abs(summary.peak_width - 54) <= 3
        assert summary.overparam_global_min

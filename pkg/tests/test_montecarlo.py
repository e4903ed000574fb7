"""Monte Carlo cells and sweeps."""

import pytest

from src.core.errors import InvalidInputError
from src.modules.analytic_management import mse_min_norm
from src.modules.model_management import CovarianceSpec, ProblemConfig
from src.modules.montecarlo_management import (
    AxisKind,
    RotationPolicy,
    SamplingMode,
    SweepAxis,
    SweepPlan,
    cell_streams,
    run_cell,
    run_covariance_experiment,
    run_decomposition_sweep,
    run_sigma_sweep,
    run_sweep,
)


def _plan(**changes) -> SweepPlan:
    fields = dict(
        base=ProblemConfig.build(p_S=10, p_C=2, n=30, sigma_v2=1.0),
        axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=[0, 5, 60]),
        M_r=20,
        M_u=10,
        master_seed=17,
        threads=1,
        num_spectra=20,
    )
    fields.update(changes)
    return SweepPlan(**fields)


class TestSweepAxis:
    def test_must_increase(self):
        with pytest.raises(ValueError):
            SweepAxis(kind=AxisKind.FAKE_COUNT, values=[0, 10, 10])

    def test_counts_must_be_integers(self):
        with pytest.raises(ValueError):
            SweepAxis(kind=AxisKind.FAKE_COUNT, values=[0, 1.5])

    def test_sample_count_floor(self):
        with pytest.raises(ValueError):
            SweepAxis(kind=AxisKind.SAMPLE_COUNT, values=[0, 4])

    def test_apply(self):
        base = ProblemConfig.build(p_S=10, n=30)
        axis = SweepAxis(kind=AxisKind.ASSUMED_NOISE, values=[0.0, 2.5])
        assert axis.apply(base, 2.5).sigma_hat2 == 2.5
        assert axis.field_name == "sigma_hat2"


class TestCell:
    def test_independent_of_thread_count(self):
        config = ProblemConfig.build(p_S=8, p_F=4, n=25, sigma_v2=0.5)
        single = run_cell(config, 12, 5, SamplingMode.FULL_SAMPLING, cell_streams(3, 0), threads=1)
        pooled = run_cell(config, 12, 5, SamplingMode.FULL_SAMPLING, cell_streams(3, 0), threads=4)
        assert single.eps_hat == pooled.eps_hat
        assert single.eps_stderr == pooled.eps_stderr
        assert single.eps_F_hat == pooled.eps_F_hat

    def test_single_realization_has_no_stderr(self):
        config = ProblemConfig.build(p_S=4, n=10)
        estimate = run_cell(config, 1, 3, SamplingMode.FULL_SAMPLING, cell_streams(1, 0))
        assert estimate.eps_stderr is None
        assert estimate.M_r == 1

    def test_noiseless_well_determined_is_exact(self):
        config = ProblemConfig.build(p_S=5, n=20, sigma_v2=0.0)
        estimate = run_cell(config, 5, 5, SamplingMode.FULL_SAMPLING, cell_streams(2, 0))
        assert estimate.eps_hat == pytest.approx(0.0, abs=1e-18)
        assert estimate.eps_F_hat == 0.0

    def test_conditional_trace_has_no_inner_draws(self):
        config = ProblemConfig.build(p_S=5, p_C=1, n=20)
        estimate = run_cell(config, 5, 7, SamplingMode.CONDITIONAL_TRACE, cell_streams(2, 0))
        assert estimate.M_u is None
        assert estimate.eps_C_hat == pytest.approx(1.0)

    def test_held_out_output_error(self):
        config = ProblemConfig.build(p_S=5, p_F=2, n=30, sigma_v2=0.5)
        estimate = run_cell(config, 10, 20, SamplingMode.FULL_SAMPLING, cell_streams(4, 0), test_points=50)
        assert estimate.eps_y_hat is not None
        assert estimate.test_points == 50

    def test_rejects_empty_budget(self):
        with pytest.raises(InvalidInputError):
            run_cell(ProblemConfig.build(p_S=5, n=20), 0, 5, SamplingMode.FULL_SAMPLING, cell_streams(1, 0))


class TestSweeps:
    def test_rerun_is_identical(self):
        first = run_sweep(_plan())
        second = run_sweep(_plan())
        assert [c.estimate.eps_hat for c in first.cells] == [c.estimate.eps_hat for c in second.cells]

    def test_threads_do_not_change_results(self):
        first = run_sweep(_plan(threads=1))
        second = run_sweep(_plan(threads=3))
        assert [c.estimate.eps_hat for c in first.cells] == [c.estimate.eps_hat for c in second.cells]

    def test_empty_axis(self):
        result = run_sweep(_plan(axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=[])))
        assert result.cells == []

    def test_near_threshold_cell_has_no_analytic_value(self):
        result = run_sweep(_plan(axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=[20])))
        cell = result.cells[0]
        assert cell.near_threshold
        assert cell.analytic is not None and cell.analytic.eps is None
        assert cell.estimate.eps_hat > 0

    def test_analytic_companion_present(self):
        result = run_sweep(_plan())
        assert all(c.analytic is not None and c.analytic.eps is not None for c in result.cells)
        assert result.cells[0].eps_normalized == pytest.approx(result.cells[0].estimate.eps_hat / 12.0)

    def test_sigma_sweep_reports_argmin(self):
        config = ProblemConfig.build(p_S=10, n=30, sigma_v2=4.0)
        result = run_sigma_sweep(config, [0.0, 1.0, 4.0, 16.0], M_r=10, M_u=5, master_seed=9, num_spectra=10)
        assert result.argmin_sigma_hat2 in (0.0, 1.0, 4.0, 16.0)
        assert result.optimal_sigma_hat2 == pytest.approx(4.0)
        assert result.optimum_exact
        assert all(c.analytic is not None for c in result.cells)

    def test_decomposition_needs_test_points(self):
        with pytest.raises(InvalidInputError):
            run_decomposition_sweep(ProblemConfig.build(p_S=5, n=20), [0, 40], 5, 5, test_points=0)

    def test_covariance_experiment_pairs(self):
        config = ProblemConfig.build(p_S=6, n=15)
        result = run_covariance_experiment([(0.0, 0.0), (1.0, 2.0)], config, [0, 30], M_r=4, M_u=3, master_seed=5)
        assert [(p.alpha, p.alpha_F) for p in result.pairs] == [(0.0, 0.0), (1.0, 2.0)]
        assert result.rotation_policy == RotationPolicy.PER_EXPERIMENT
        # correlated features have no closed-form companion
        assert all(c.analytic is None for c in result.pairs[1].sweep.cells)
        assert result.pairs[1].sweep.plan.label == "alpha=1,alpha_F=2"


@pytest.mark.slow
class TestAgainstClosedForms:
    """Empirical cells agree with the closed forms within a few standard errors."""

    @pytest.mark.parametrize(
        "p_S, p_C, p_F, n, sigma_v2",
        [(20, 0, 0, 40, 1.0), (20, 0, 60, 40, 1.0), (10, 10, 5, 60, 4.0), (10, 10, 80, 40, 4.0)],
    )
    def test_min_norm_cells(self, p_S, p_C, p_F, n, sigma_v2):
        base = ProblemConfig.build(p_S=p_S, p_C=p_C, n=n, sigma_v2=sigma_v2)
        plan = _plan(
            base=base,
            axis=SweepAxis(kind=AxisKind.FAKE_COUNT, values=[p_F]),
            M_r=400,
            mode=SamplingMode.CONDITIONAL_TRACE,
        )
        cell = run_sweep(plan).cells[0]
        assert abs(cell.estimate.eps_hat - cell.analytic.eps) <= 4 * cell.estimate.eps_stderr
        assert abs(cell.estimate.eps_F_hat - cell.analytic.eps_F) <= 4 * cell.estimate.eps_F_stderr + 1e-12

    def test_ridge_cell(self):
        base = ProblemConfig.build(p_S=20, p_F=30, n=40, sigma_v2=1.0, sigma_hat2=5.0)
        plan = _plan(
            base=base,
            axis=SweepAxis(kind=AxisKind.ASSUMED_NOISE, values=[5.0]),
            M_r=400,
            num_spectra=400,
            mode=SamplingMode.CONDITIONAL_TRACE,
        )
        cell = run_sweep(plan).cells[0]
        band = 4 * (cell.estimate.eps_stderr + cell.analytic.eps_stderr)
        assert abs(cell.estimate.eps_hat - cell.analytic.eps) <= band

    def test_conditional_trace_matches_full_sampling(self):
        config = ProblemConfig.build(p_S=10, p_F=5, n=40, sigma_v2=4.0)
        full = run_cell(config, 200, 2, SamplingMode.FULL_SAMPLING, cell_streams(21, 0))
        conditional = run_cell(config, 200, 2, SamplingMode.CONDITIONAL_TRACE, cell_streams(21, 0))
        band = 3 * (full.eps_stderr**2 + conditional.eps_stderr**2) ** 0.5
        assert abs(full.eps_hat - conditional.eps_hat) <= band
        assert conditional.eps_stderr <= full.eps_stderr

    def test_error_ignores_relevant_prior_shape(self):
        # decayed spectra keep trace p_S, so the expected error is unchanged
        isotropic = ProblemConfig.build(p_S=100, n=200, sigma_v2=1.0)
        decayed = isotropic.with_updates(cov_x_S=CovarianceSpec.decayed_eigen(2.0, seed=11))
        first = run_cell(isotropic, 200, 1, SamplingMode.CONDITIONAL_TRACE, cell_streams(31, 0))
        second = run_cell(decayed, 200, 1, SamplingMode.CONDITIONAL_TRACE, cell_streams(31, 1))
        band = 3 * (first.eps_stderr**2 + second.eps_stderr**2) ** 0.5
        assert abs(first.eps_hat - second.eps_hat) <= band
        assert second.eps_hat == pytest.approx(mse_min_norm(100, 0, 200, 100.0, 0.0, 1.0).eps, rel=0.1)

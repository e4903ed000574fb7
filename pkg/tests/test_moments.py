"""Random-matrix identities and their sampling oracles."""

import numpy as np
import pytest

from src.core.errors import InvalidInputError, NearThresholdError, UnsupportedError
from src.core.services.linalg import sample_haar_batch
from src.core.services.random import StreamFactory
from src.modules.moments_management import (
    OracleCheck,
    bulk_edge_outlier_fraction,
    estimate_moments_grid,
    expected_pinv_gram_trace,
    gaussian_sandwich_trace,
    haar_entry_statistics,
    haar_first_column_chi2,
    haar_fourth_moments,
    haar_orthogonality_error,
    moment_terms,
    oracle_gaussian_sandwich,
    oracle_haar_fourth_moments,
    oracle_pinv_gram_trace,
    oracle_q_expectation,
    q_expectation,
    sample_spectrum,
    spectrum_symmetry_error,
)


class TestClosedForms:
    @pytest.mark.parametrize("n, p_bar", [(10, 4), (4, 10)])
    def test_pinv_gram_trace(self, n, p_bar):
        assert expected_pinv_gram_trace(n, p_bar) == pytest.approx(0.8)

    def test_pinv_gram_trace_near_threshold(self):
        with pytest.raises(NearThresholdError):
            expected_pinv_gram_trace(10, 9)

    def test_haar_moments_p2(self):
        assert haar_fourth_moments(2).m4 == pytest.approx(0.375)

    def test_haar_moments_p8(self):
        moments = haar_fourth_moments(8)
        assert moments.m4 == pytest.approx(3 / 80)
        assert moments.m22 == pytest.approx(1 / 80)
        assert moments.m_cross == pytest.approx(-1 / 560)

    def test_haar_moments_need_p_above_one(self):
        with pytest.raises(UnsupportedError):
            haar_fourth_moments(1)

    def test_q_expectation(self):
        result = q_expectation(200, 400, 50)
        assert result.mu_qbar == pytest.approx(0.21821, abs=1e-5)
        assert result.mu_q == pytest.approx(0.5 - result.mu_qbar)

    def test_q_expectation_without_fake_block(self):
        assert q_expectation(5, 12, 12).mu_qbar == 0.0

    def test_q_expectation_needs_wide_matrix(self):
        with pytest.raises(UnsupportedError):
            q_expectation(12, 5, 2)

    def test_sandwich(self):
        result = gaussian_sandwich_trace(np.diag([1.0, 2.0, 3.0]), 4)
        assert result.coefficient == pytest.approx(6.0)

    def test_sandwich_rejects_asymmetric(self):
        with pytest.raises(InvalidInputError):
            gaussian_sandwich_trace(np.array([[1.0, 2.0], [0.0, 1.0]]), 3)


class TestHaarStatistics:
    def test_identity_statistics(self):
        stats = haar_entry_statistics(np.eye(3)[None])
        np.testing.assert_allclose(stats[0], [1 / 3, 0.0, 0.0], atol=1e-15)

    def test_oracle_passes(self):
        checks = oracle_haar_fourth_moments(8, 20_000, StreamFactory(5), tolerance=4.0, batch_size=5000)
        assert [c.passed for c in checks] == [True, True, True]
        assert all(c.draws == 20_000 for c in checks)

    def test_oracle_detects_wrong_sign(self):
        true = haar_fourth_moments(8)
        wrong = true.model_copy(update={"m_cross": -true.m_cross})
        checks = oracle_haar_fourth_moments(8, 20_000, StreamFactory(5), expected=wrong, batch_size=5000)
        assert not checks[2].passed

    def test_orthogonality_error(self, rng):
        assert haar_orthogonality_error(sample_haar_batch(20, 5, rng)) < 1e-12
        assert haar_orthogonality_error(2.0 * np.eye(3)[None]) == pytest.approx(3.0)

    def test_first_column_uniform_on_sphere(self):
        check = haar_first_column_chi2(4, 20_000, StreamFactory(8), batch_size=5000)
        assert check.passed
        assert check.draws == 20_000


class TestSamplingOracles:
    @pytest.mark.parametrize("n, p_bar", [(10, 4), (4, 10)])
    def test_pinv_gram_trace(self, n, p_bar):
        check = oracle_pinv_gram_trace(n, p_bar, 20_000, StreamFactory(1), tolerance=4.0)
        assert check.expected == pytest.approx(0.8)
        assert check.passed

    def test_projector_blocks(self):
        checks = oracle_q_expectation(5, 12, 4, 20_000, StreamFactory(2), tolerance=4.0)
        assert all(c.passed for c in checks)

    def test_gaussian_sandwich(self):
        checks = oracle_gaussian_sandwich(np.diag([1.0, 2.0, 3.0]), 4, 20_000, StreamFactory(3), tolerance=4.0)
        assert all(c.passed for c in checks)

    def test_compare_without_stderr_needs_exact_match(self):
        assert OracleCheck.compare("x", 1.0, 1.0, 0.0, 3.0, 1).passed
        assert not OracleCheck.compare("x", 1.0, 1.1, 0.0, 3.0, 1).passed


class TestSpectra:
    def test_sample_spectrum_padding(self, rng):
        sample = sample_spectrum(4, 9, rng)
        assert sample.eigenvalues.shape == (9,)
        assert sample.positive_count == 4
        assert np.all(np.diff(sample.eigenvalues) <= 0)

    def test_sample_spectrum_matches_eigvalsh(self):
        rng = np.random.default_rng(4)
        A = np.random.default_rng(4).standard_normal((6, 3))
        sample = sample_spectrum(6, 3, rng)
        np.testing.assert_allclose(sample.eigenvalues, np.sort(np.linalg.eigvalsh(A.T @ A))[::-1], rtol=1e-10)

    def test_moment_terms_shrink_to_identity(self):
        eigenvalues = np.array([[4.0, 1.0, 0.0]])
        term1, term2 = moment_terms(eigenvalues, 1e12, 3)
        assert term1[0] == pytest.approx(0.0, abs=1e-10)
        assert term2[0] == pytest.approx(1.0, rel=1e-6)

    def test_moment_terms_pseudoinverse(self):
        term1, _ = moment_terms(np.array([[4.0, 1.0, 0.0]]), 0.0, 2)
        assert term1[0] == pytest.approx(1.25)

    def test_grid_reuses_spectra(self):
        grid = estimate_moments_grid(30, 10, [0.5, 2.0], 6, 50, StreamFactory(6))
        assert [m.sigma_hat2 for m in grid] == [0.5, 2.0]
        assert grid[0].mu1 > grid[1].mu1
        assert grid[0].num_spectra == 50

    def test_grid_independent_of_threads(self):
        single = estimate_moments_grid(30, 10, [1.0], 6, 40, StreamFactory(6), threads=1)[0]
        pooled = estimate_moments_grid(30, 10, [1.0], 6, 40, StreamFactory(6), threads=4)[0]
        assert single.mu1 == pooled.mu1
        assert single.mu2 == pooled.mu2

    def test_grid_needs_two_spectra(self):
        with pytest.raises(InvalidInputError):
            estimate_moments_grid(30, 10, [1.0], 6, 1, StreamFactory(6))

    def test_symmetry(self, rng):
        assert spectrum_symmetry_error(30, 50, rng) < 1e-10

    def test_bulk_edge(self, rng):
        assert bulk_edge_outlier_fraction(400, 100, 0.1, rng) < 0.01

"""Misspecified and oracle estimators, solve routes and conditional errors."""

import numpy as np
import pytest

from src.core.errors import InvalidInputError
from src.modules.estimator_management import (
    SolveRoute,
    build_misspecified,
    build_misspecified_direct,
    build_misspecified_general,
    build_oracle,
    conditional_mse,
    conditional_prediction_mse,
    estimate,
    oracle_conditional_mse,
)
from src.modules.model_management import FeatureSet, ProblemConfig, sample_features


def _identity_features(n: int) -> FeatureSet:
    return FeatureSet(A_S=np.eye(n), A_C=np.zeros((n, 0)), A_F=np.zeros((n, 0)))


class TestBuildMisspecified:
    def test_identity_design_min_norm(self):
        estimator = build_misspecified(_identity_features(4), 0.0)
        np.testing.assert_allclose(estimator.W_bar, np.eye(4), atol=1e-15)

    def test_identity_design_unit_noise(self):
        estimator = build_misspecified(_identity_features(4), 1.0)
        np.testing.assert_allclose(estimator.W_bar, 0.5 * np.eye(4), atol=1e-15)

    def test_split_into_shared_and_fake_rows(self, small_config, rng):
        features = sample_features(small_config, rng)
        estimator = build_misspecified(features, 0.3)
        assert estimator.W_S.shape == (6, 20)
        assert estimator.W_F.shape == (3, 20)
        assert estimator.p_bar == 9

    @pytest.mark.parametrize("route", list(SolveRoute))
    def test_solve_routes_agree(self, route):
        config = ProblemConfig.build(p_S=2, p_F=1, n=6)
        features = sample_features(config, np.random.default_rng(21))
        svd_form = build_misspecified(features, 0.8).W_bar
        direct = build_misspecified_direct(features, 0.8, route).W_bar
        np.testing.assert_allclose(direct, svd_form, atol=1e-10)

    def test_direct_route_needs_positive_noise(self, small_config, rng):
        features = sample_features(small_config, rng)
        with pytest.raises(InvalidInputError):
            build_misspecified_direct(features, 0.0, SolveRoute.FEATURE_SPACE)

    def test_general_prior_reduces_to_identity_case(self, small_config, rng):
        features = sample_features(small_config, rng)
        general = build_misspecified_general(features, np.eye(9), 0.4).W_bar
        np.testing.assert_allclose(general, build_misspecified(features, 0.4).W_bar, atol=1e-10)

    @pytest.mark.parametrize("sigma_hat2", [-1.0, float("nan"), float("inf")])
    def test_bad_assumed_noise(self, small_config, rng, sigma_hat2):
        features = sample_features(small_config, rng)
        with pytest.raises(InvalidInputError):
            build_misspecified(features, sigma_hat2)


class TestEstimate:
    def test_interpolates_when_overparameterized(self, rng):
        config = ProblemConfig.build(p_S=5, p_F=20, n=12)
        features = sample_features(config, rng)
        y = rng.standard_normal(12)
        x_hat = estimate(build_misspecified(features, 0.0), y)
        fitted = features.A_S @ x_hat.x_S_hat + features.A_F @ x_hat.x_F_hat
        np.testing.assert_allclose(fitted, y, atol=1e-9)

    def test_missing_block_is_zero(self, small_config, rng):
        features = sample_features(small_config, rng)
        x_hat = estimate(build_misspecified(features, 0.1), rng.standard_normal((3, 20)))
        assert x_hat.x_S_hat.shape == (3, 6)
        assert x_hat.x_F_hat.shape == (3, 3)
        np.testing.assert_array_equal(x_hat.x_C_hat, np.zeros((3, 2)))

    def test_wrong_length(self, small_config, rng):
        features = sample_features(small_config, rng)
        with pytest.raises(InvalidInputError):
            estimate(build_misspecified(features, 0.1), np.zeros(19))


class TestConditionalMse:
    def test_decomposition(self, small_config, rng):
        features = sample_features(small_config, rng)
        estimator = build_misspecified(features, 0.2)
        cm = conditional_mse(estimator, features, np.eye(6), 2.0, 0.5)
        W_S = estimator.W_S
        residual = np.eye(6) - W_S @ features.A_S
        assert cm.eps1 == pytest.approx(np.trace(residual @ residual.T), rel=1e-12)
        assert cm.eps_S == pytest.approx(cm.eps1 + np.trace(W_S @ W_S.T) * 2.5, rel=1e-12)
        assert cm.total == pytest.approx(cm.eps_S + 2.0, rel=1e-12)

    def test_no_shared_parameters(self, rng):
        config = ProblemConfig.build(p_S=0, p_C=3, p_F=4, n=10)
        features = sample_features(config, rng)
        cm = conditional_mse(build_misspecified(features, 0.0), features, np.zeros((0, 0)), 3.0, 1.0)
        assert cm.eps_S == 0.0
        assert cm.total == pytest.approx(3.0)
        assert cm.eps_F > 0

    def test_matches_sampled_error(self, rng):
        # p_C = 0 so the conditional error needs no average over A_C
        config = ProblemConfig.build(p_S=4, p_F=2, n=15, sigma_v2=0.7)
        features = sample_features(config, rng)
        estimator = build_misspecified(features, 0.5)
        cm = conditional_mse(estimator, features, np.eye(4), 0.0, 0.7)

        x_S = rng.standard_normal((200_000, 4))
        y = x_S @ features.A_S.T + np.sqrt(0.7) * rng.standard_normal((200_000, 15))
        x_hat = estimate(estimator, y)
        sampled = np.mean(np.sum(np.square(x_S - x_hat.x_S_hat), axis=1))
        fake = np.mean(np.sum(np.square(x_hat.x_F_hat), axis=1))
        assert sampled == pytest.approx(cm.eps_S, rel=0.02)
        assert fake == pytest.approx(cm.eps_F, rel=0.02)

    def test_dimension_mismatch(self, small_config, rng):
        features = sample_features(small_config, rng)
        with pytest.raises(InvalidInputError):
            conditional_mse(build_misspecified(features, 0.0), features, np.eye(5), 0.0, 1.0)


class TestOracle:
    def test_correct_model_matches_oracle(self, rng):
        config = ProblemConfig.build(p_S=5, n=12, sigma_v2=0.9)
        features = sample_features(config, rng)
        W_O = build_oracle(features, np.eye(5), 0.9)
        estimator = build_misspecified(features, 0.9)
        np.testing.assert_allclose(W_O, estimator.W_bar, atol=1e-10)
        cm = conditional_mse(estimator, features, np.eye(5), 0.0, 0.9)
        assert oracle_conditional_mse(W_O, features, np.eye(5), 0.9) == pytest.approx(cm.total, rel=1e-10)

    def test_oracle_never_worse(self, small_config, rng):
        features = sample_features(small_config, rng)
        K_x = np.eye(8)
        W_O = build_oracle(features, K_x, small_config.sigma_v2)
        oracle = oracle_conditional_mse(W_O, features, K_x, small_config.sigma_v2)
        estimator = build_misspecified(features, 0.0)
        # misspecified error evaluated on the same A_C, not averaged over it
        W_S = estimator.W_S
        R_S = np.eye(6) - W_S @ features.A_S
        leak_C = W_S @ features.A_C
        misspecified = np.sum(R_S * R_S) + np.sum(leak_C * leak_C) + 2.0 + small_config.sigma_v2 * np.sum(W_S * W_S)
        assert oracle <= misspecified + 1e-12


class TestPredictionMse:
    def test_matches_sampled_prediction_error(self, rng):
        config = ProblemConfig.build(p_S=3, p_F=2, n=10, sigma_v2=0.4)
        features = sample_features(config, rng)
        test = sample_features(config, rng, rows=5)
        estimator = build_misspecified(features, 0.1)
        expected = conditional_prediction_mse(estimator, features, test, np.eye(3), None, 0.4)

        draws = 200_000
        x_S = rng.standard_normal((draws, 3))
        y = x_S @ features.A_S.T + np.sqrt(0.4) * rng.standard_normal((draws, 10))
        x_hat = estimate(estimator, y)
        truth = x_S @ test.A_S.T + np.sqrt(0.4) * rng.standard_normal((draws, 5))
        prediction = x_hat.x_S_hat @ test.A_S.T + x_hat.x_F_hat @ test.A_F.T
        assert np.mean(np.square(truth - prediction)) == pytest.approx(expected, rel=0.02)

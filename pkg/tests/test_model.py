"""Covariance materialization, sampling and the observation model."""

import numpy as np
import pytest

from src.core.errors import InvalidInputError, InvalidSpecError
from src.modules.model_management import (
    CovarianceSpec,
    FeatureCovariance,
    ProblemConfig,
    decayed_spectrum,
    generate_observations,
    materialize_covariance,
    materialize_priors,
    sample_features,
    sample_unknowns,
    sample_unknowns_batch,
)


class TestCovariance:
    def test_decayed_spectrum_alpha_one(self):
        np.testing.assert_allclose(sorted(decayed_spectrum(3, 1.0)), [0.5, 1.0, 1.5])

    def test_decayed_spectrum_alpha_zero_is_flat(self):
        np.testing.assert_allclose(decayed_spectrum(5, 0.0), np.ones(5))

    def test_decayed_eigen_materialized(self):
        cov = materialize_covariance(CovarianceSpec.decayed_eigen(1.0, seed=4), 3)
        np.testing.assert_allclose(cov.eigenvalues, [1.5, 1.0, 0.5])
        np.testing.assert_allclose(np.linalg.eigvalsh(cov.matrix), [0.5, 1.0, 1.5], atol=1e-12)
        np.testing.assert_allclose(cov.factor @ cov.factor.T, cov.matrix, atol=1e-12)
        assert cov.trace == pytest.approx(3.0)

    def test_fixed_seed_is_reproducible(self):
        spec = CovarianceSpec.decayed_eigen(2.0, seed=11)
        np.testing.assert_array_equal(materialize_covariance(spec, 4).matrix, materialize_covariance(spec, 4).matrix)

    def test_isotropic(self):
        cov = materialize_covariance(CovarianceSpec.isotropic(2.5), 4)
        np.testing.assert_allclose(cov.matrix, 2.5 * np.eye(4))

    def test_decayed_without_stream_rejected(self):
        with pytest.raises(InvalidSpecError):
            materialize_covariance(CovarianceSpec.decayed_eigen(1.0), 3)

    @pytest.mark.parametrize("scale", [0.0, -1.0, float("inf")])
    def test_bad_isotropic_scale(self, scale):
        with pytest.raises(InvalidSpecError):
            materialize_covariance(CovarianceSpec.isotropic(scale), 3)

    def test_zero_dimension_rejected(self):
        with pytest.raises(InvalidSpecError):
            materialize_covariance(CovarianceSpec.isotropic(), 0)


class TestProblemConfig:
    def test_derived_sizes(self, small_config):
        assert small_config.p == 8
        assert small_config.p_bar == 9
        assert small_config.trace_x == pytest.approx(8.0)

    def test_invalid_config_raises_domain_error(self):
        with pytest.raises(InvalidSpecError):
            ProblemConfig.build(p_S=-1, n=10)
        with pytest.raises(InvalidSpecError):
            ProblemConfig.build(p_S=3, n=0)

    def test_with_updates_revalidates(self, small_config):
        assert small_config.with_updates(p_F=40).p_bar == 46
        with pytest.raises(InvalidSpecError):
            small_config.with_updates(sigma_v2=-2.0)


class TestSampling:
    def test_shapes(self, small_config, rng):
        features = sample_features(small_config, rng)
        assert features.A_S.shape == (20, 6)
        assert features.A_C.shape == (20, 2)
        assert features.A_F.shape == (20, 3)
        assert features.A_bar.shape == (20, 9)
        assert features.A_tilde.shape == (20, 8)

    def test_no_fake_features(self, rng):
        config = ProblemConfig.build(p_S=4, n=10)
        features = sample_features(config, rng)
        assert features.A_F.shape == (10, 0)
        np.testing.assert_array_equal(features.A_bar, features.A_S)

    def test_held_out_rows(self, small_config, rng):
        assert sample_features(small_config, rng, rows=7).n == 7

    def test_noiseless_draw_has_zero_noise(self, rng):
        config = ProblemConfig.build(p_S=3, n=5, sigma_v2=0.0)
        draw = sample_unknowns(config, rng)
        np.testing.assert_array_equal(draw.v, np.zeros(5))

    def test_observations_match_model(self, small_config, rng):
        features = sample_features(small_config, rng)
        draw = sample_unknowns(small_config, rng)
        y = generate_observations(features, draw)
        expected = features.A_S @ draw.x_S + features.A_C @ draw.x_C + draw.v
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_batched_observations(self, small_config, rng):
        features = sample_features(small_config, rng)
        batch = sample_unknowns_batch(small_config, 4, rng)
        y = generate_observations(features, batch)
        assert y.shape == (4, 20)
        row = features.A_S @ batch.x_S[2] + features.A_C @ batch.x_C[2] + batch.v[2]
        np.testing.assert_allclose(y[2], row, atol=1e-12)

    def test_dimension_mismatch(self, small_config, rng):
        features = sample_features(small_config, rng)
        other = sample_unknowns(small_config.with_updates(p_S=5), rng)
        with pytest.raises(InvalidInputError):
            generate_observations(features, other)

    def test_prior_scale_reaches_unknowns(self, rng):
        config = ProblemConfig.build(p_S=2, n=3, cov_x_S=CovarianceSpec.isotropic(9.0))
        batch = sample_unknowns_batch(config, 20000, rng, materialize_priors(config))
        assert batch.x_S.var(axis=0) == pytest.approx([9.0, 9.0], rel=0.05)

    def test_correlated_feature_rows(self):
        config = ProblemConfig.build(p_S=3, n=20000)
        feature_cov = FeatureCovariance(
            shared=CovarianceSpec.decayed_eigen(1.0, seed=2), fake=CovarianceSpec.isotropic()
        )
        features = sample_features(config, np.random.default_rng(0), feature_cov=feature_cov)
        target = materialize_covariance(CovarianceSpec.decayed_eigen(1.0, seed=2), 3).matrix
        np.testing.assert_allclose(features.A_S.T @ features.A_S / 20000, target, atol=0.05)

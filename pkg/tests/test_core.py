"""Streams, running moments, Haar sampling and SVD helpers."""

import numpy as np
import pytest

from src.core.errors import ConfigError, IngestionError, InvalidInputError, LabError
from src.core.services.linalg import (
    pinv_gram_trace,
    sample_haar,
    sample_haar_batch,
    shrinkage_inverse,
    thin_svd,
)
from src.core.services.random import StreamFactory, StreamPurpose
from src.core.services.stats import RunningMoments
from src.core.settings.observability import RunRecorder


class TestStreamFactory:
    def test_same_path_same_draws(self):
        a = StreamFactory(99).generator(3, StreamPurpose.FEATURES).standard_normal(5)
        b = StreamFactory(99).generator(3, StreamPurpose.FEATURES).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_child_matches_flat_path(self):
        nested = StreamFactory(99).child(0, 4).generator(StreamPurpose.UNKNOWNS).random(4)
        flat = StreamFactory(99).generator(0, 4, StreamPurpose.UNKNOWNS).random(4)
        np.testing.assert_array_equal(nested, flat)

    def test_purposes_are_independent(self):
        factory = StreamFactory(1)
        features = factory.generator(0, StreamPurpose.FEATURES).random(8)
        unknowns = factory.generator(0, StreamPurpose.UNKNOWNS).random(8)
        assert not np.allclose(features, unknowns)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            StreamFactory(-1)

    def test_label(self):
        assert StreamFactory(5).child(1).label(2) == "5/1/2"


class TestRunningMoments:
    def test_matches_numpy(self, rng):
        data = rng.standard_normal((257, 3))
        acc = RunningMoments(3)
        for row in data[:100]:
            acc.push(row)
        acc.update(data[100:])
        np.testing.assert_allclose(acc.mean, data.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(acc.variance, data.var(axis=0, ddof=1), rtol=1e-10)
        np.testing.assert_allclose(acc.stderr, data.std(axis=0, ddof=1) / np.sqrt(257), rtol=1e-10)

    def test_merge_equals_single_pass(self, rng):
        data = rng.standard_normal(1000) * 3 + 10
        left, right, whole = RunningMoments(), RunningMoments(), RunningMoments()
        left.update(data[:313])
        right.update(data[313:])
        whole.update(data)
        left.merge(right)
        assert left.count == whole.count == 1000
        assert left.mean == pytest.approx(float(whole.mean), rel=1e-13)
        assert left.variance == pytest.approx(float(whole.variance), rel=1e-11)

    def test_single_sample_has_no_stderr(self):
        acc = RunningMoments()
        acc.push(2.0)
        assert np.isnan(acc.stderr)
        assert float(acc.mean) == 2.0


class TestHaar:
    def test_orthogonal(self, rng):
        Q = sample_haar(6, rng)
        np.testing.assert_allclose(Q.T @ Q, np.eye(6), atol=1e-12)

    def test_batch_orthogonal(self, rng):
        batch = sample_haar_batch(50, 4, rng)
        gram = np.einsum("bki,bkj->bij", batch, batch)
        assert np.max(np.abs(gram - np.eye(4))) < 1e-12

    def test_first_entry_is_centered(self):
        # sign correction: without it the diagonal of QR's Q is biased positive
        batch = sample_haar_batch(4000, 3, np.random.default_rng(3))
        assert abs(batch[:, 0, 0].mean()) < 0.05


class TestSpectral:
    def test_pinv_at_zero(self, rng):
        A = rng.standard_normal((7, 4))
        np.testing.assert_allclose(shrinkage_inverse(thin_svd(A), 0.0), np.linalg.pinv(A), atol=1e-12)

    def test_pinv_of_rank_deficient(self, rng):
        B = rng.standard_normal((6, 2))
        A = B @ rng.standard_normal((2, 5))
        svd = thin_svd(A)
        assert svd.rank == 2
        np.testing.assert_allclose(shrinkage_inverse(svd, 0.0), np.linalg.pinv(A), atol=1e-10)

    def test_ridge_matches_normal_equations(self, rng):
        A = rng.standard_normal((5, 8))
        expected = A.T @ np.linalg.inv(A @ A.T + 0.7 * np.eye(5))
        np.testing.assert_allclose(shrinkage_inverse(thin_svd(A), 0.7), expected, atol=1e-12)

    def test_empty_matrix(self):
        svd = thin_svd(np.zeros((4, 0)))
        assert shrinkage_inverse(svd, 0.0).shape == (0, 4)
        assert pinv_gram_trace(svd) == 0.0

    def test_pinv_gram_trace(self, rng):
        A = rng.standard_normal((9, 3))
        assert pinv_gram_trace(thin_svd(A)) == pytest.approx(np.trace(np.linalg.inv(A.T @ A)), rel=1e-10)

    def test_rejects_vectors(self):
        with pytest.raises(InvalidInputError):
            thin_svd(np.ones(3))


class TestErrors:
    def test_exit_codes(self):
        assert ConfigError("bad").exit_code == 2
        assert IngestionError("bad").exit_code == 3
        assert InvalidInputError("bad").exit_code == 1
        assert isinstance(InvalidInputError("bad"), LabError)

    def test_messages_carry_location(self):
        assert str(ConfigError("unknown key", line=4, source="a.toml")) == "a.toml:4: unknown key"
        assert "row 3" in str(IngestionError("bad value", row=3, column="y"))
        assert "column 'y'" in str(IngestionError("bad value", row=3, column="y"))


class TestRunRecorder:
    def test_records_success_and_failure(self):
        recorder = RunRecorder("analytic")
        with recorder.track("grid"):
            pass
        with pytest.raises(RuntimeError):
            with recorder.track("grid"):
                raise RuntimeError("boom")
        timings = recorder.timings()
        assert timings["grid"]["calls"] == 2
        assert timings["grid"]["failures"] == 1

"""Noise-gap estimator tests."""

import math

import numpy as np
import pytest

from gqhuber.noise import NoiseStats, current_b, observe_batch


class TestObserveBatch:
    def test_constant_batches_have_zero_deviation(self):
        stats = observe_batch(NoiseStats(), [1, 1, 1, 1], [2, 2, 2, 2])
        assert stats.sigma_pred == 0.0
        assert stats.sigma_target == 0.0
        assert stats.b == 0.0
        assert stats.batches_seen == 1

    def test_hand_computed_sample_stds(self):
        # sample std of [0, 2] is sqrt(2); of [0, 4] is 2*sqrt(2)
        stats = observe_batch(NoiseStats(), [0, 2], [0, 4])
        assert stats.sigma_pred == pytest.approx(math.sqrt(2), abs=1e-15)
        assert stats.sigma_target == pytest.approx(2 * math.sqrt(2), abs=1e-15)
        assert stats.b == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_rejects_short_batches(self):
        with pytest.raises(ValueError):
            observe_batch(NoiseStats(), [1], [1, 2])
        with pytest.raises(ValueError):
            observe_batch(NoiseStats(), [1, 2], [])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            observe_batch(NoiseStats(), [1, math.nan], [1, 2])

    def test_input_stats_unchanged(self):
        fresh = NoiseStats()
        observe_batch(fresh, [0, 2], [0, 4])
        assert fresh.batches_seen == 0 and fresh.b == 0.0

    def test_running_mean_across_batches(self):
        stats = NoiseStats()
        stats = observe_batch(stats, [0, 2], [0, 0.5])  # stds sqrt(2), something
        stats = observe_batch(stats, [1, 1], [1, 1])  # stds 0, 0
        assert stats.sigma_pred == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
        assert stats.batches_seen == 2

    def test_synthetic_noise_recovers_gap(self):
        # quantile sets contaminated with noise of std 0.1 and 0.5; the
        # batch-mean centring absorbs the shared base level, so each batch's
        # sample std estimates its stream's noise scale
        rng = np.random.default_rng(0)
        stats = NoiseStats()
        for _ in range(10_000):
            base = rng.uniform(-5, 5)
            pred = base + rng.normal(0.0, 0.1, size=32)
            target = base + rng.normal(0.0, 0.5, size=32)
            stats = observe_batch(stats, pred, target)
        assert stats.b == pytest.approx(0.4, abs=0.02)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(42)
        batches = [(rng.normal(size=16), rng.normal(size=16)) for _ in range(20)]
        for center in ("batch", "running"):
            plain = NoiseStats(center=center)
            scaled = NoiseStats(center=center)
            c = 3.7
            for pred, target in batches:
                plain = observe_batch(plain, pred, target)
                scaled = observe_batch(scaled, c * pred, c * target)
            assert scaled.sigma_pred == pytest.approx(c * plain.sigma_pred, rel=1e-9)
            assert scaled.sigma_target == pytest.approx(c * plain.sigma_target, rel=1e-9)
            assert scaled.b == pytest.approx(c * plain.b, rel=1e-9)

    def test_order_invariance_within_batch(self):
        rng = np.random.default_rng(9)
        pred = rng.normal(size=32)
        target = rng.normal(size=32)
        perm = rng.permutation(32)
        a = observe_batch(NoiseStats(), pred, target)
        b = observe_batch(NoiseStats(), pred[perm], target[perm])
        assert a.sigma_pred == pytest.approx(b.sigma_pred, abs=1e-12)
        assert a.sigma_target == pytest.approx(b.sigma_target, abs=1e-12)

    def test_convergence_error_shrinks_with_batches(self):
        # moving |sigma_pred - true| averaged over 100-batch windows should
        # fall well inside 3 standard errors of the final estimate
        rng = np.random.default_rng(21)
        true = 0.3
        stats = NoiseStats()
        window_err = []
        errs = []
        for i in range(2_000):
            pred = rng.normal(0.0, true, size=32)
            target = rng.normal(0.0, true, size=32)
            stats = observe_batch(stats, pred, target)
            errs.append(abs(stats.sigma_pred - true * _C4_32))
            if (i + 1) % 100 == 0:
                window_err.append(np.mean(errs))
                errs = []
        assert window_err[-1] < window_err[0]
        assert np.mean(window_err[-5:]) < np.mean(window_err[:5])

    def test_running_center_pools_values(self):
        stats = NoiseStats(center="running")
        stats = observe_batch(stats, [0.0, 2.0], [0.0, 4.0])
        stats = observe_batch(stats, [0.0, 2.0], [0.0, 4.0])
        # pooled sample std of [0, 2, 0, 2] about mean 1 is sqrt(4/3)
        assert stats.sigma_pred == pytest.approx(math.sqrt(4.0 / 3.0), abs=1e-12)

    def test_rejects_unknown_center(self):
        with pytest.raises(ValueError):
            NoiseStats(center="median")


# bias of the n=32 Bessel-corrected sample std under Gaussian noise,
# c4(32) = sqrt(2/31) * gamma(16) / gamma(15.5)
_C4_32 = math.sqrt(2.0 / 31.0) * math.exp(math.lgamma(16.0) - math.lgamma(15.5))


class TestCurrentB:
    def test_fallback_before_data(self):
        assert current_b(NoiseStats()) == 1.0
        assert current_b(NoiseStats(fallback_b=0.5)) == 0.5

    def test_after_observation(self):
        stats = observe_batch(NoiseStats(), [0, 2], [0, 4])
        assert current_b(stats) == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_identical_streams_give_zero(self):
        stats = observe_batch(NoiseStats(), [0, 1, 2], [0, 1, 2])
        assert current_b(stats) == 0.0

    def test_rejects_negative_fallback(self):
        with pytest.raises(ValueError):
            NoiseStats(fallback_b=-1.0)

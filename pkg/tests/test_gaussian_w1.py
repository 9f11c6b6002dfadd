"""W1-between-Gaussians tests: closed form, quadrature oracle, empirical form.

The two quadrature goldens were computed with independent high-precision
integration of |F_p^{-1}(t) - F_q^{-1}(t)| before implementation.
"""

import math

import numpy as np
import pytest

from gqhuber.gaussian_w1 import Gaussian, w1_closed, w1_empirical, w1_quadrature
from gqhuber.losses import SQRT_2_OVER_PI, c_gl

# independent 40-digit evaluations, rounded to double
W1_STD_VS_DOUBLED = 0.79788456080286535588  # = sqrt(2/pi)
W1_MIXED_GOLDEN = 1.0084907026168296375  # W1(N(1,1), N(0,0.5))


class TestGaussianType:
    def test_rejects_negative_std(self):
        with pytest.raises(ValueError):
            Gaussian(0.0, -1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Gaussian(math.nan, 1.0)
        with pytest.raises(ValueError):
            Gaussian(0.0, math.inf)

    def test_dirac_is_zero_std(self):
        assert Gaussian(2.0, 0.0).std == 0.0


class TestClosedForm:
    def test_equal_variance_reduces_to_mean_shift(self):
        assert w1_closed(Gaussian(0, 1), Gaussian(3, 1)) == 3.0

    def test_equal_mean_golden(self):
        got = w1_closed(Gaussian(0, 1), Gaussian(0, 2))
        assert got == pytest.approx(W1_STD_VS_DOUBLED, abs=1e-15)
        assert got == pytest.approx(SQRT_2_OVER_PI, abs=1e-15)

    def test_identical_diracs(self):
        assert w1_closed(Gaussian(0, 0), Gaussian(0, 0)) == 0.0

    def test_mixed_case_matches_quadrature(self):
        closed = w1_closed(Gaussian(1, 1), Gaussian(0, 0.5))
        assert closed == pytest.approx(W1_MIXED_GOLDEN, abs=1e-12)
        assert closed == pytest.approx(w1_quadrature(Gaussian(1, 1), Gaussian(0, 0.5), 10**6), abs=1e-6)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            mus = rng.uniform(-5, 5, size=3)
            stds = rng.uniform(0, 3, size=3)
            p, q, r = (Gaussian(m, s) for m, s in zip(mus, stds))
            dpq = w1_closed(p, q)
            assert dpq == pytest.approx(w1_closed(q, p), abs=1e-9)
            assert dpq <= w1_closed(p, r) + w1_closed(r, q) + 1e-9

    def test_zero_iff_identical(self):
        assert w1_closed(Gaussian(1.5, 0.3), Gaussian(1.5, 0.3)) == 0.0
        assert w1_closed(Gaussian(1.5, 0.3), Gaussian(1.5, 0.31)) > 0.0

    def test_defining_identity_with_c_gl(self):
        # c_gl(u, b) = W1(N(theta, s1), N(y, s2)) - b*sqrt(2/pi), b = |s1-s2|
        rng = np.random.default_rng(11)
        for _ in range(100):
            theta, y = rng.uniform(-5, 5, size=2)
            s1, s2 = rng.uniform(0, 3, size=2)
            b = abs(s1 - s2)
            if b < 1e-12:
                continue
            w1 = w1_closed(Gaussian(theta, s1), Gaussian(y, s2))
            assert c_gl(theta - y, b) == pytest.approx(w1 - b * SQRT_2_OVER_PI, abs=1e-10)


class TestQuadrature:
    def test_oracle_self_check_mean_shift(self):
        got = w1_quadrature(Gaussian(0, 1), Gaussian(3, 1), 10**5)
        assert got == pytest.approx(3.0, abs=1e-4)

    def test_identical_inputs(self):
        assert w1_quadrature(Gaussian(0, 1), Gaussian(0, 1), 10**5) == 0.0

    def test_equal_mean_case(self):
        got = w1_quadrature(Gaussian(0, 1), Gaussian(0, 2), 10**5)
        assert got == pytest.approx(W1_STD_VS_DOUBLED, abs=1e-4)

    def test_rejects_coarse_grids(self):
        with pytest.raises(ValueError):
            w1_quadrature(Gaussian(0, 1), Gaussian(0, 2), 999)

    def test_error_decays_with_refinement(self):
        p, q = Gaussian(1, 1), Gaussian(0, 0.5)
        errs = [abs(w1_quadrature(p, q, n) - W1_MIXED_GOLDEN) for n in (10**3, 10**4, 10**5)]
        assert errs[0] > errs[1] > errs[2]

    def test_closed_form_agrees_over_random_pairs(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = Gaussian(rng.uniform(-5, 5), rng.uniform(0, 3))
            q = Gaussian(rng.uniform(-5, 5), rng.uniform(0, 3))
            assert abs(w1_closed(p, q) - w1_quadrature(p, q, 10**6)) <= 1e-4


class TestEmpirical:
    def test_identical_lists(self):
        assert w1_empirical([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_computed_mean_gap(self):
        assert w1_empirical([0, 0], [1, 3]) == 2.0

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            w1_empirical([-1, 1], [1, -1])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            w1_empirical([1, 2], [1, 2, 3])

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        xs = np.sort(rng.normal(size=64))
        ys = np.sort(rng.normal(size=64))
        assert w1_empirical(xs, ys) == pytest.approx(w1_empirical(ys, xs), abs=0)

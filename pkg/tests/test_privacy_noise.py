import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from silo_dp.core_math import LossBounds, LossConfig, derive_bounds
from silo_dp.errors import CalibrationError, DimensionError, InvalidDatasetError
from silo_dp.privacy_noise import (
    NO_PRIVACY,
    PrivacyBudget,
    child_rng,
    child_seed,
    dppsgd_sensitivity,
    gaussian_sigma,
    sample_gaussian_vec,
    sample_l2_laplace,
    split_budget,
)


class TestBudget:
    def test_validation(self):
        for eps, delta in [(0, 0), (-1, 0), (1, -0.1), (1, 1.0)]:
            with pytest.raises(ValueError):
                PrivacyBudget(eps, delta)
        assert NO_PRIVACY.is_noise_free and not PrivacyBudget(0.01).is_noise_free


class TestSensitivity:
    def test_examples(self):
        assert dppsgd_sensitivity(LossBounds(6.0, 5.001, 0.001), 10000) == pytest.approx(1.2)
        assert dppsgd_sensitivity(LossBounds(1.0, 1.0, 1.0), 2) == 1.0

    def test_doubling_m_halves(self):
        b = derive_bounds(LossConfig(5.0, 0.001, 1000.0))
        for m in (1, 7, 1000, 12345):
            assert dppsgd_sensitivity(b, 2 * m) == dppsgd_sensitivity(b, m) / 2

    def test_batch_size_cancels(self):
        b = derive_bounds(LossConfig(5.0, 0.001, 1000.0))
        assert dppsgd_sensitivity(b, 1000, 1) == dppsgd_sensitivity(b, 1000, 100)

    @given(st.integers(1, 10**6), st.integers(1, 10**6), st.floats(0.1, 100), st.floats(0.1, 100))
    def test_monotone(self, m1, m2, L1, L2):
        b1, b2 = LossBounds(min(L1, L2), 1.0, 0.01), LossBounds(max(L1, L2), 1.0, 0.01)
        lo, hi = sorted((m1, m2))
        assert dppsgd_sensitivity(b1, hi) <= dppsgd_sensitivity(b1, lo)
        assert dppsgd_sensitivity(b1, lo) <= dppsgd_sensitivity(b2, lo)

    def test_empty_dataset(self):
        with pytest.raises(InvalidDatasetError):
            dppsgd_sensitivity(LossBounds(1, 1, 1), 0)


class TestL2Laplace:
    def test_norm_distribution_ks(self):
        rng = child_rng(0, "ks")
        d, delta2, eps = 20, 1.2, 0.01
        norms = np.array([np.linalg.norm(sample_l2_laplace(d, delta2, eps, rng)) for _ in range(100_000)])
        ks = stats.kstest(norms, stats.gamma(a=d, scale=delta2 / eps).cdf).statistic
        assert ks < 0.01
        assert abs(norms.mean() / 2400.0 - 1) < 0.01

    def test_components_centered(self):
        rng = child_rng(1, "center")
        Z = np.array([sample_l2_laplace(5, 1.0, 1.0, rng) for _ in range(100_000)])
        se = Z.std(axis=0) / math.sqrt(Z.shape[0])
        assert np.all(np.abs(Z.mean(axis=0)) < 3 * se)

    def test_epsilon_rescaling_with_same_stream(self):
        a = sample_l2_laplace(7, 2.0, 0.5, child_rng(3, "x"))
        b = sample_l2_laplace(7, 2.0, 0.05, child_rng(3, "x"))
        np.testing.assert_allclose(b, 10 * a, rtol=1e-12)

    def test_errors(self):
        with pytest.raises(DimensionError):
            sample_l2_laplace(0, 1.0, 1.0, child_rng(0))
        with pytest.raises(CalibrationError):
            sample_l2_laplace(3, 0.0, 1.0, child_rng(0))

    def test_reproducible(self):
        assert np.array_equal(sample_l2_laplace(4, 1, 1, child_rng(5, "a")), sample_l2_laplace(4, 1, 1, child_rng(5, "a")))


class TestGaussian:
    def test_sigma_examples(self):
        assert gaussian_sigma(1.0, 1.0, 1e-5) == pytest.approx(math.sqrt(2 * math.log(125000)), rel=1e-12)
        assert gaussian_sigma(1.0, 1.0, 1e-5) == pytest.approx(4.8450, abs=5e-4)
        assert gaussian_sigma(2.0, 0.3, 1e-3) == 2 * gaussian_sigma(1.0, 0.3, 1e-3)

    def test_sigma_errors(self):
        for args in [(1, 1, 1.25), (1, 1, 0.0), (1, 1.5, 1e-5), (1, 0, 1e-5)]:
            with pytest.raises(CalibrationError):
                gaussian_sigma(*args)

    def test_vec(self):
        assert np.array_equal(sample_gaussian_vec(4, 0.0, child_rng(0)), np.zeros(4))
        Z = sample_gaussian_vec(100_000, 3.0, child_rng(1, "var"))
        assert abs(Z.var() / 9.0 - 1) < 0.02
        assert np.array_equal(sample_gaussian_vec(3, 1.0, child_rng(2)), sample_gaussian_vec(3, 1.0, child_rng(2)))


class TestSplit:
    def test_reference_values(self):
        s = split_budget(PrivacyBudget(0.01, 1e-4), 0.99)
        assert s.eps_obj == pytest.approx(0.0099) and s.eps_out == pytest.approx(0.0001)
        assert s.delta_obj == pytest.approx(9.9e-5)

    @given(st.floats(1e-8, 10), st.floats(0, 0.999), st.floats(1e-3, 0.999))
    def test_exact_resum(self, eps, delta, frac):
        s = split_budget(PrivacyBudget(eps, delta), frac)
        assert s.eps_obj + s.eps_out == eps
        assert s.delta_obj + s.delta_out == delta
        assert min(s.eps_obj, s.eps_out, s.delta_obj, s.delta_out) >= 0

    def test_bad_fraction(self):
        for f in (0.0, 1.0, -0.5):
            with pytest.raises(CalibrationError):
                split_budget(PrivacyBudget(1.0, 0.1), f)


class TestSeeds:
    def test_streams_distinct_and_stable(self):
        a = child_rng(7, "p01", "noise", 0).random(3)
        assert np.array_equal(a, child_rng(7, "p01", "noise", 0).random(3))
        assert not np.array_equal(a, child_rng(7, "p01", "noise", 1).random(3))
        assert not np.array_equal(a, child_rng(8, "p01", "noise", 0).random(3))
        assert child_seed(1, "a") == child_seed(1, "a") != child_seed(1, "b")

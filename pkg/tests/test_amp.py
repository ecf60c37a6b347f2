import math
from dataclasses import replace

import numpy as np
import pytest

from silo_dp.amp import (
    AmpCalibration,
    AmpHyperparams,
    amp_run,
    calibrate_amp,
    minimize_perturbed,
    perturbed_objective,
    train_amp,
)
from silo_dp.core_math import LossConfig, loss, loss_gradient
from silo_dp.dppsgd import DppsgdHyperparams, train_non_private
from silo_dp.errors import CalibrationError, ConvergenceError
from silo_dp.evaluation import auc
from silo_dp.models import Algorithm
from silo_dp.privacy_noise import PrivacyBudget, split_budget


def quadratic(A, a):
    def f(w):
        r = w - a
        return 0.5 * float(r @ A @ r), A @ r

    return f


class TestMinimizer:
    def test_identity_quadratic(self):
        a = np.array([1.0, -2.0, 3.0])
        res = minimize_perturbed(quadratic(np.eye(3), a), np.zeros(3), 1e-6)
        assert np.linalg.norm(res.w - a) <= 1e-6

    def test_already_certified(self):
        a = np.array([1e-3, 0.0])
        w0 = np.zeros(2)
        res = minimize_perturbed(quadratic(np.eye(2), a), w0, 1.0)
        assert res.iterations == 0 and np.array_equal(res.w, w0)

    def test_distance_bound_on_curved_quadratic(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
            curv = rng.uniform(0.05, 20, 4)
            A = Q @ np.diag(curv) @ Q.T
            a = rng.standard_normal(4) * 10
            h = 10.0 ** rng.uniform(-8, -3)
            res = minimize_perturbed(quadratic(A, a), np.zeros(4), h)
            assert res.grad_norm <= h
            assert np.linalg.norm(res.w - a) <= h / curv.min() * (1 + 1e-6)

    def test_non_convergence(self):
        with pytest.raises(ConvergenceError) as exc:
            minimize_perturbed(quadratic(np.diag([1.0, 1e-4]), np.array([1.0, 1.0])), np.zeros(2), 1e-12, 5)
        assert exc.value.grad_norm > 1e-12


class TestCalibration:
    def test_split_matches_table_values(self):
        s = split_budget(PrivacyBudget(0.01, 1e-4), 0.99)
        assert (s.eps_obj, s.eps_out) == (pytest.approx(0.0099), pytest.approx(0.0001))

    def test_formulas(self):
        m, h = 500, 1 / 500**2
        split = split_budget(PrivacyBudget(0.5, 1 / m**2), 0.99)
        cal = calibrate_amp(m, split, h)
        assert cal.lam == pytest.approx(2 / (m * split.eps_obj))
        assert cal.sigma_obj == pytest.approx(math.sqrt(8 * math.log(2 / split.delta_obj) + 4 * split.eps_obj) / split.eps_obj)
        sens = 2 * h / cal.lam
        assert cal.sigma_out == pytest.approx(sens / split.eps_out * math.sqrt(2 * math.log(1.25 / split.delta_out)))

    def test_sigma_out_linear_in_h(self):
        split = split_budget(PrivacyBudget(0.01, 1e-6), 0.99)
        a, b = calibrate_amp(1000, split, 1e-6), calibrate_amp(1000, split, 2e-6)
        assert b.sigma_out == pytest.approx(2 * a.sigma_out, rel=1e-14)
        assert (a.lam, a.sigma_obj) == (b.lam, b.sigma_obj)

    def test_zero_delta(self, small_partners):
        data = small_partners[0][1]
        with pytest.raises(CalibrationError):
            train_amp(data, AmpHyperparams(budget=PrivacyBudget(0.01, 0.0), h=1e-4))


class TestTraining:
    def test_certificate_recomputation(self, small_partners):
        rng = np.random.default_rng(5)
        for k in range(20):
            ramped, cold = small_partners[k % len(small_partners)]
            data = cold if k % 2 else ramped
            eps = float(rng.choice([0.01, 0.1, 0.4]))
            run = amp_run(data, AmpHyperparams.for_size(data.m, eps, seed=k))
            _, g = perturbed_objective(data, run.calibration.lam, run.b1)(run.w_approx)
            assert np.linalg.norm(g) <= 1.0 / data.m**2

    def test_noise_free_certifies_unperturbed(self, small_partners):
        data = small_partners[1][1]
        hp = AmpHyperparams.for_size(data.m, 0.01, noise_free=True)
        run = amp_run(data, hp)
        assert np.array_equal(run.b1, np.zeros_like(run.b1)) and np.array_equal(run.b2, np.zeros_like(run.b2))
        cfg = LossConfig(1.0, run.calibration.lam, 1.0)
        assert np.linalg.norm(loss_gradient(run.w_approx, data.X, data.y, cfg)) <= hp.h

    def test_release_is_sum_of_parts(self, small_partners):
        data = small_partners[2][1]
        hp = AmpHyperparams.for_size(data.m, 0.4, seed=2)
        run = amp_run(data, hp)
        model = train_amp(data, hp)
        assert np.array_equal(model.weights, run.w_approx + run.b2)
        assert model.algorithm is Algorithm.AMP and model.budget.delta == 1 / data.m**2
        assert np.array_equal(train_amp(data, hp).weights, model.weights)

    def test_objective_matches_core_loss(self, small_partners):
        data = small_partners[0][1]
        rng = np.random.default_rng(1)
        b1, w = rng.standard_normal(data.X.shape[1]), rng.standard_normal(data.X.shape[1])
        value, grad = perturbed_objective(data, 0.3, b1)(w)
        cfg = LossConfig(1.0, 0.3, 1.0)
        assert value == pytest.approx(loss(w, data.X, data.y, cfg) + b1 @ w, rel=1e-12)
        np.testing.assert_allclose(grad, loss_gradient(w, data.X, data.y, cfg) + b1, rtol=1e-10, atol=1e-14)

    def test_calibration_override(self, small_partners):
        data = small_partners[0][1]

        def custom(m, split, h, lipschitz=1.0):
            return AmpCalibration(lam=0.5, sigma_obj=0.0, sigma_out=0.0)

        run = amp_run(data, AmpHyperparams.for_size(data.m, 0.01, calibration=custom))
        assert run.calibration.lam == 0.5 and np.all(run.b2 == 0)

    def test_noise_free_agrees_with_dppsgd(self, small_partners):
        # same regularization strength on both sides, no noise anywhere
        ramped, cold = small_partners[0]
        lam = 0.01

        def fixed(m, split, h, lipschitz=1.0):
            return AmpCalibration(lam=lam, sigma_obj=0.0, sigma_out=0.0)

        amp = train_amp(ramped, AmpHyperparams.for_size(ramped.m, 0.01, calibration=fixed))
        sgd = train_non_private(ramped, DppsgdHyperparams.with_C(1.0, lam=lam, epochs=20))
        assert abs(auc(cold.X @ amp.weights, cold.y) - auc(cold.X @ sgd.weights, cold.y)) < 0.01

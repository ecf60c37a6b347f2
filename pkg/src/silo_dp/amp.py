"""Approximate Minima Perturbation for l2-regularized logistic regression.

The objective gets a random linear term ``<b1, w>``, is minimized only until
its gradient norm drops below ``h``, and the approximate minimizer is
released with Gaussian output noise whose scale grows linearly with ``h``.

All noise and regularization constants come from one calibration function,
``calibrate_amp``. Pass ``AmpHyperparams(calibration=...)`` to substitute
other constants without touching the trainer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core_math import sigmoid
from .data import PartnerDataset, check_normalized
from .errors import CalibrationError, ConfigurationError, ConvergenceError, InvalidDatasetError
from .models import Algorithm, PrivateModel
from .privacy_noise import (
    BudgetSplit,
    PrivacyBudget,
    child_rng,
    gaussian_sigma,
    sample_gaussian_vec,
    split_budget,
)


@dataclass(frozen=True)
class AmpCalibration:
    lam: float  # regularization strength of the perturbed objective
    sigma_obj: float  # b1 ~ N(0, (sigma_obj / m)^2 I)
    sigma_out: float  # b2 ~ N(0, sigma_out^2 I)


def calibrate_amp(m: int, split: BudgetSplit, h: float, lipschitz: float = 1.0,
                  smoothness: float = 1.0) -> AmpCalibration:
    """Default AMP constants.

    * ``lam = 2 * smoothness / (m * eps_obj)``
    * ``sigma_obj = L * sqrt(8 ln(2/delta_obj) + 4 eps_obj) / eps_obj``
    * output sensitivity ``2h / lam`` (two points with gradient norm <= h of a
      lam-strongly convex objective are each within ``h/lam`` of its
      minimizer), fed to the classic Gaussian mechanism with
      ``(eps_out, delta_out)``.
    """
    if m < 1:
        raise InvalidDatasetError("AMP needs a non-empty dataset")
    if not (split.delta_obj > 0 and split.delta_out > 0):
        raise CalibrationError("AMP needs delta > 0 on both halves of the budget")
    lam = 2.0 * smoothness / (m * split.eps_obj)
    sigma_obj = lipschitz * math.sqrt(8.0 * math.log(2.0 / split.delta_obj) + 4.0 * split.eps_obj) / split.eps_obj
    sigma_out = gaussian_sigma(2.0 * h / lam, split.eps_out, split.delta_out)
    return AmpCalibration(lam=lam, sigma_obj=sigma_obj, sigma_out=sigma_out)


@dataclass(frozen=True)
class AmpHyperparams:
    budget: PrivacyBudget
    h: float
    frac_obj: float = 0.99
    lipschitz_L: float = 1.0
    seed: int = 0
    max_iterations: int = 100_000
    noise_free: bool = False  # audit mode: b1 = b2 = 0
    calibration: Callable[..., AmpCalibration] | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError(f"h must be > 0, got {self.h}")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")

    @classmethod
    def for_size(cls, m: int, epsilon: float = 0.01, **kw) -> "AmpHyperparams":
        """Defaults tied to the training-set size: ``h = delta = 1/m^2``."""
        return cls(budget=PrivacyBudget(epsilon, 1.0 / m ** 2), h=1.0 / m ** 2, **kw)


@dataclass
class MinimizeResult:
    w: np.ndarray
    grad_norm: float
    iterations: int


def minimize_perturbed(objective, w0, h: float, max_iterations: int = 100_000) -> MinimizeResult:
    """Gradient descent with backtracking until ``||grad|| <= h``.

    ``objective(w)`` returns ``(value, gradient)``. The first iterate whose
    gradient norm is at most ``h`` is returned. Near the optimum, function
    decreases fall below floating-point resolution; a step is then also
    accepted when the value is unchanged to rounding and the gradient norm
    shrinks.
    """
    if not h > 0:
        raise ConfigurationError(f"h must be > 0, got {h}")
    w = np.array(w0, dtype=np.float64)
    f, g = objective(w)
    gn = float(np.linalg.norm(g))
    step = 1.0
    for it in range(max_iterations):
        if gn <= h:
            return MinimizeResult(w, gn, it)
        step *= 2.0
        while True:
            w_new = w - step * g
            f_new, g_new = objective(w_new)
            gn_new = float(np.linalg.norm(g_new))
            if f_new <= f - 1e-4 * step * gn * gn:
                break
            if abs(f_new - f) <= 8 * np.finfo(float).eps * max(1.0, abs(f)) and gn_new < gn:
                break
            step *= 0.5
            if step < 1e-30:
                raise ConvergenceError(f"line search failed at gradient norm {gn:.3e}", gn)
        w, f, g, gn = w_new, f_new, g_new, gn_new
    if gn <= h:
        return MinimizeResult(w, gn, max_iterations)
    raise ConvergenceError(
        f"gradient norm {gn:.3e} still above h={h:.3e} after {max_iterations} iterations", gn
    )


@dataclass(frozen=True)
class AmpRun:
    w_approx: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    calibration: AmpCalibration
    split: BudgetSplit
    grad_norm: float
    iterations: int

    @property
    def released(self) -> np.ndarray:
        return self.w_approx + self.b2


def perturbed_objective(data: PartnerDataset, lam: float, b1: np.ndarray):
    """``w -> (L(w) + <b1, w>, grad)`` with C = 1 and no ball constraint.

    Same arithmetic as ``core_math.loss``/``loss_gradient`` but shares the
    margins between value and gradient.
    """
    X, y, m = data.X, data.y, data.m

    def objective(w):
        z = X @ w
        ce = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - z * y
        value = float(ce.mean() + 0.5 * lam * (w @ w) + b1 @ w)
        grad = ((sigmoid(z) - y) @ X) / m + lam * w + b1
        return value, grad

    return objective


def amp_run(data: PartnerDataset, hp: AmpHyperparams) -> AmpRun:
    if hp.budget.delta <= 0:
        raise CalibrationError("AMP requires delta > 0")
    check_normalized(data)
    m, D = data.m, data.X.shape[1]
    split = split_budget(hp.budget, hp.frac_obj)
    calibrate = hp.calibration or calibrate_amp
    cal = calibrate(m, split, hp.h, hp.lipschitz_L)
    rng = child_rng(hp.seed, "amp")
    if hp.noise_free:
        b1 = np.zeros(D)
    else:
        b1 = sample_gaussian_vec(D, cal.sigma_obj / m, rng)
    res = minimize_perturbed(perturbed_objective(data, cal.lam, b1), np.zeros(D), hp.h, hp.max_iterations)
    b2 = np.zeros(D) if hp.noise_free else sample_gaussian_vec(D, cal.sigma_out, rng)
    return AmpRun(res.w, b1, b2, cal, split, res.grad_norm, res.iterations)


def train_amp(data: PartnerDataset, hp: AmpHyperparams) -> PrivateModel:
    run = amp_run(data, hp)
    warnings = ("degenerate-labels",) if np.unique(data.y).shape[0] < 2 else ()
    return PrivateModel(
        weights=run.released,
        algorithm=Algorithm.AMP,
        budget=hp.budget,
        partner_id=data.partner_id,
        seed=hp.seed,
        C=1.0,
        warnings=warnings,
    )

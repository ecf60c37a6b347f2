"""Regularized logistic loss, its gradient, R-ball projection and loss bounds.

Weight vectors carry the bias as their last coordinate; the data pipeline
appends the matching constant column, so there is no separate intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DimensionError

# Smallest positive double and largest double below 1; keeps sigmoid in (0, 1).
_TINY = float(np.nextafter(0.0, 1.0))
_ONE_MINUS = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class LossConfig:
    """Loss weight ``C``, l2 strength ``lam`` and hypothesis-ball radius ``R``."""

    C: float
    lam: float
    R: float

    def __post_init__(self):
        if not (self.C > 0 and self.lam > 0 and self.R > 0):
            raise ConfigurationError(
                f"LossConfig needs C, lam, R > 0, got C={self.C}, lam={self.lam}, R={self.R}"
            )


@dataclass(frozen=True)
class LossBounds:
    """Lipschitz (L), smoothness (beta), strong convexity (gamma), sensitivity."""

    L: float
    beta: float
    gamma: float
    delta2: float = 0.0

    def with_sensitivity(self, delta2: float) -> "LossBounds":
        return replace(self, delta2=float(delta2))


def sigmoid(z):
    """Logistic function, overflow-free for any finite input.

    Accepts a scalar or an array. Outputs are clamped to the open unit
    interval, so ``sigmoid(-1000)`` is the smallest positive double rather
    than zero.
    """
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = np.clip(out, _TINY, _ONE_MINUS)
    if out.ndim == 0:
        return float(out)
    return out


def _check_dims(w, X, y):
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or w.ndim != 1:
        raise DimensionError(f"expected 1-D weights and 2-D data, got {w.shape} and {X.shape}")
    if w.shape[0] != X.shape[1]:
        raise DimensionError(f"weights have length {w.shape[0]} but data has {X.shape[1]} columns")
    if y.shape != (X.shape[0],):
        raise DimensionError(f"labels have shape {y.shape}, expected ({X.shape[0]},)")
    return w, X, y


def loss(w, X, y, cfg: LossConfig) -> float:
    """Mean sigmoid cross-entropy scaled by ``C`` plus ``lam/2 * ||w||^2``.

    Each point's cross-entropy is evaluated as
    ``log1p(exp(-|z|)) + max(z, 0) - z * y`` so saturated predictions never
    hit ``log(0)``.
    """
    w, X, y = _check_dims(w, X, y)
    z = X @ w
    ce = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - z * y
    return float(cfg.C * ce.mean() + 0.5 * cfg.lam * (w @ w))


def loss_gradient(w, X, y, cfg: LossConfig) -> np.ndarray:
    """``(C/m) * sum_i (sigmoid(w.x_i) - y_i) x_i + lam * w``."""
    w, X, y = _check_dims(w, X, y)
    resid = sigmoid(X @ w) - y
    return cfg.C * (resid @ X) / X.shape[0] + cfg.lam * w


def project_to_ball(w, R: float) -> np.ndarray:
    """Scale ``w`` onto the radius-``R`` ball if it lies outside it.

    Vectors already inside the ball are returned as-is, so the call is
    idempotent and bit-exact on them.
    """
    w = np.asarray(w, dtype=np.float64)
    norm = math.sqrt(float(w @ w))
    if norm <= R:
        return w
    out = w * (R / norm)
    # rounding can leave the rescaled norm one ulp above R
    while math.sqrt(float(out @ out)) > R:
        out = out * _ONE_MINUS
    return out


def derive_bounds(cfg: LossConfig) -> LossBounds:
    # gradient norm <= C*||x|| + lam*||w|| <= C + lam*R on normalized data;
    # Hessian norm <= C*||x||^2 + lam <= C + lam; lam*||w||^2/2 gives gamma = lam
    return LossBounds(L=cfg.C + cfg.lam * cfg.R, beta=cfg.C + cfg.lam, gamma=cfg.lam)

"""Sensitivity calibration, noise samplers and privacy-budget splitting.

Samplers never touch global RNG state: callers pass a ``numpy.random.Generator``
and get a reproducible stream. ``child_rng`` derives independent generators
from one root seed and a tuple of keys (partner id, purpose tag, draw index).
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .core_math import LossBounds
from .errors import CalibrationError, DimensionError, InvalidDatasetError


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise CalibrationError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise CalibrationError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def is_noise_free(self) -> bool:
        return math.isinf(self.epsilon)


# epsilon = inf: audit/test mode, no noise is added
NO_PRIVACY = PrivacyBudget(math.inf, 0.0)


@dataclass(frozen=True)
class BudgetSplit:
    eps_obj: float
    delta_obj: float
    eps_out: float
    delta_out: float


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed keys must be non-negative, got {key}")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def child_rng(root_seed: int, *keys) -> np.random.Generator:
    """Generator for the stream identified by ``(root_seed, *keys)``.

    Keys may be ints or strings; strings are mapped through CRC32 so the
    mapping is stable across processes and Python versions.
    """
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(_key_to_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(root_seed: int, *keys) -> int:
    """Integer seed for the stream ``(root_seed, *keys)``, for APIs that take ints."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(_key_to_int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32) @ np.array([1, 1 << 32], dtype=np.uint64))


def dppsgd_sensitivity(bounds: LossBounds, m: int, b: int = 1) -> float:
    """L2-sensitivity ``2L / (gamma * m)`` of one pass of projected permutation SGD.

    The batch size cancels out of the single-pass bound and is only
    validated. Use ``bounds.with_sensitivity`` to attach the result.
    """
    if m <= 0:
        raise InvalidDatasetError(f"sensitivity needs a non-empty dataset, got m={m}")
    if b < 1:
        raise InvalidDatasetError(f"batch size must be >= 1, got {b}")
    return 2.0 * bounds.L / (bounds.gamma * m)


def sample_l2_laplace(d: int, delta2: float, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Draw from the density proportional to ``exp(-(epsilon/delta2) * ||z||_2)``.

    The norm is Gamma(shape=d, scale=delta2/epsilon) and the direction is
    uniform on the unit sphere. The direction is drawn first, then the norm,
    so for a fixed generator state the draws at different ``epsilon`` are
    exact rescalings of each other.
    """
    if d < 1:
        raise DimensionError(f"noise dimension must be >= 1, got {d}")
    if not (delta2 > 0 and epsilon > 0):
        raise CalibrationError(f"need delta2 > 0 and epsilon > 0, got {delta2}, {epsilon}")
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    radius = rng.gamma(shape=d, scale=delta2 / epsilon)
    return direction * radius


def gaussian_sigma(sensitivity: float, epsilon: float, delta: float) -> float:
    """Classic Gaussian-mechanism scale ``(sensitivity/eps) * sqrt(2 ln(1.25/delta))``.

    Only valid for ``0 < epsilon <= 1`` and ``0 < delta < 1``.
    """
    if not 0.0 < delta < 1.0:
        raise CalibrationError(f"Gaussian mechanism needs 0 < delta < 1, got {delta}")
    if not 0.0 < epsilon <= 1.0:
        raise CalibrationError(f"classic Gaussian mechanism needs 0 < epsilon <= 1, got {epsilon}")
    if not sensitivity > 0:
        raise CalibrationError(f"sensitivity must be > 0, got {sensitivity}")
    return sensitivity / epsilon * math.sqrt(2.0 * math.log(1.25 / delta))


def sample_gaussian_vec(d: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise CalibrationError(f"sigma must be >= 0, got {sigma}")
    return rng.standard_normal(d) * sigma


def split_budget(budget: PrivacyBudget, frac_obj: float) -> BudgetSplit:
    """Split a budget between objective and output perturbation.

    The larger share is computed by multiplication and the smaller one by
    subtraction; the subtraction is then exact (Sterbenz), so the parts
    re-sum to the original epsilon and delta bit-exactly.
    """
    if not 0.0 < frac_obj < 1.0:
        raise CalibrationError(f"frac_obj must lie in (0, 1), got {frac_obj}")

    def _split(total):
        if frac_obj >= 0.5:
            major = frac_obj * total
            return major, total - major
        major = (1.0 - frac_obj) * total
        return total - major, major

    eps_obj, eps_out = _split(budget.epsilon)
    delta_obj, delta_out = _split(budget.delta)
    return BudgetSplit(eps_obj=eps_obj, delta_obj=delta_obj, eps_out=eps_out, delta_out=delta_out)

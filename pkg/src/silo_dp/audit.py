"""Monte Carlo check of the DP inequality on one pair of neighboring datasets.

The mechanism is run many times on each dataset, outputs are histogrammed on
a shared binning, and every bin is tested in both directions against
``e^eps * P' + delta`` plus three binomial standard errors of slack. Passing
is evidence, not proof; failing at a given ``eps`` is strong evidence that
the mechanism is not ``eps``-DP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import PartnerDataset, Period
from .dppsgd import DppsgdHyperparams, train_dppsgd
from .core_math import LossConfig
from .errors import ConfigurationError
from .privacy_noise import PrivacyBudget, child_rng

MIN_TRIALS = 10_000
SLACK_SE = 3.0

Mechanism = Callable[[object, np.random.Generator], object]


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    max_log_ratio: float  # over bins populated under both datasets
    worst_excess: float  # largest P - (e^eps P' + delta + slack); <= 0 means pass
    trials: int
    n_bins: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_log_ratio": self.max_log_ratio,
            "worst_excess": self.worst_excess,
            "trials": self.trials,
            "n_bins": self.n_bins,
        }


def _as_matrix(outputs) -> np.ndarray:
    out = np.asarray(outputs, dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2 or not 1 <= out.shape[1] <= 3:
        raise ConfigurationError(f"mechanism output must reduce to 1-3 dimensions, got shape {out.shape[1:]}")
    return out


def _edges(pooled: np.ndarray, bins: int) -> list[np.ndarray]:
    """Quantile edges of the pooled sample, open at both ends."""
    edges = []
    for j in range(pooled.shape[1]):
        inner = np.unique(np.quantile(pooled[:, j], np.linspace(0, 1, bins + 1)[1:-1]))
        edges.append(np.concatenate(([-np.inf], inner, [np.inf])))
    return edges


def _histogram(sample: np.ndarray, edges) -> np.ndarray:
    idx = [np.searchsorted(e[1:-1], sample[:, j], side="right") for j, e in enumerate(edges)]
    flat = np.ravel_multi_index(idx, [len(e) - 1 for e in edges])
    return np.bincount(flat, minlength=int(np.prod([len(e) - 1 for e in edges])))


def compare_histograms(p_counts, q_counts, trials: int, epsilon: float, delta: float) -> AuditResult:
    p = np.asarray(p_counts, dtype=np.float64) / trials
    q = np.asarray(q_counts, dtype=np.float64) / trials
    e = math.exp(epsilon)
    se = np.sqrt(p * (1 - p) / trials + e * e * q * (1 - q) / trials)
    se_rev = np.sqrt(q * (1 - q) / trials + e * e * p * (1 - p) / trials)
    excess = np.maximum(p - (e * q + delta + SLACK_SE * se), q - (e * p + delta + SLACK_SE * se_rev))
    both = (p > 0) & (q > 0)
    log_ratio = float(np.max(np.abs(np.log(p[both] / q[both])))) if both.any() else math.inf
    worst = float(excess.max())
    return AuditResult(worst <= 0.0, log_ratio, worst, trials, p.shape[0])


def empirical_dp_check(mechanism: Mechanism, D, D_neighbor, epsilon: float, delta: float = 0.0,
                       trials: int = 100_000, bins: int = 30, seed: int = 0) -> AuditResult:
    """Run ``mechanism(data, rng)`` ``trials`` times on each dataset and test
    the DP inequality bin by bin, in both directions.

    ``mechanism`` may return a scalar or a vector of at most three numbers per
    call. The binning uses pooled quantiles so it does not favor either side.
    """
    if trials < MIN_TRIALS:
        raise ConfigurationError(f"need at least {MIN_TRIALS} trials for a meaningful slack, got {trials}")
    if not epsilon >= 0 or not 0 <= delta < 1:
        raise ConfigurationError(f"invalid (epsilon, delta) = ({epsilon}, {delta})")
    outs = []
    for side, data in enumerate((D, D_neighbor)):
        rng = child_rng(seed, "audit", side)
        outs.append(_as_matrix([mechanism(data, rng) for _ in range(trials)]))
    a, b = outs
    if a.shape[1] != b.shape[1]:
        raise ConfigurationError("mechanism output dimension differs between the two datasets")
    edges = _edges(np.vstack([a, b]), bins)
    return compare_histograms(_histogram(a, edges), _histogram(b, edges), trials, epsilon, delta)


# ---------------------------------------------------------------- reference mechanisms


def randomized_response(epsilon: float) -> Mechanism:
    """Report the single bit truthfully with probability e^eps / (1 + e^eps)."""
    flip = 1.0 / (1.0 + math.exp(epsilon))

    def mech(bit, rng):
        return float(bit) if rng.random() >= flip else 1.0 - float(bit)

    return mech


def noise_free_mean(data, rng) -> float:
    return float(np.mean(data))


def toy_neighbors(m: int = 50, seed: int = 0) -> tuple[PartnerDataset, PartnerDataset]:
    """A normalized 1-D (feature plus bias) dataset and a copy with the last
    record replaced by its opposite-label, opposite-sign counterpart."""
    rng = np.random.default_rng(seed)
    scale = 2.0  # sqrt(t) + v with t = 1, v = 1
    x = rng.uniform(-1.0, 1.0, m)
    y = (x + 0.3 * rng.standard_normal(m) > 0).astype(np.float64)
    X = np.column_stack([x / scale, np.full(m, 1.0 / scale)])
    X2, y2 = X.copy(), y.copy()
    X2[-1, 0] = -X[-1, 0] if X[-1, 0] != 0 else 1.0 / scale
    y2[-1] = 1.0 - y[-1]
    D = PartnerDataset("toy", X, y, Period.RAMPED_UP, normalized=True)
    return D, PartnerDataset("toy", X2, y2, Period.RAMPED_UP, normalized=True)


def dppsgd_first_coordinate(epsilon: float, C: float = 1.0, lam: float = 0.1, R: float = 10.0) -> Mechanism:
    """DPPSGD release reduced to its first weight coordinate.

    Each call draws the permutation and the noise from the caller's generator.
    """
    hp = DppsgdHyperparams(loss_cfg=LossConfig(C=C, lam=lam, R=R), budget=PrivacyBudget(epsilon, 0.0))

    def mech(data, rng):
        return float(train_dppsgd(data, hp, rng=rng).weights[0])

    return mech

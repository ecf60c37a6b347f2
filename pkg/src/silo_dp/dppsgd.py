"""Strongly convex permutation-based mini-batch SGD with output perturbation.

One pass over a random permutation of the records, step size
``min(1/beta, 1/(gamma*t))`` with a global update counter ``t``, projection
onto the radius-R ball after every update and once more at the end, then
L2-Laplace noise calibrated to ``2L / (gamma * m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .core_math import LossBounds, LossConfig, derive_bounds, project_to_ball
from .data import PartnerDataset, check_normalized, train_test_split
from .errors import ConfigurationError
from .evaluation import auc
from .models import Algorithm, PrivateModel
from .privacy_noise import NO_PRIVACY, PrivacyBudget, child_rng, dppsgd_sensitivity, sample_l2_laplace

DEFAULT_LAMBDA = 0.001
DEFAULT_C_GRID = (5.0, 10.0, 50.0, 100.0, 500.0)
DEGENERATE_LABELS = "degenerate-labels"


def default_batch_size(m: int) -> int:
    return max(16, m // 100)


@dataclass(frozen=True)
class DppsgdHyperparams:
    loss_cfg: LossConfig = field(default_factory=lambda: LossConfig(C=5.0, lam=DEFAULT_LAMBDA, R=1.0 / DEFAULT_LAMBDA))
    batch_size: int | None = None  # None: max(16, m // 100)
    epochs: int = 1
    budget: PrivacyBudget = field(default_factory=lambda: PrivacyBudget(0.01, 0.0))
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.budget.delta != 0.0:
            raise ConfigurationError("DPPSGD releases under pure epsilon-DP; budget.delta must be 0")

    @classmethod
    def with_C(cls, C: float, **kw) -> "DppsgdHyperparams":
        lam = kw.pop("lam", DEFAULT_LAMBDA)
        return cls(loss_cfg=LossConfig(C=C, lam=lam, R=1.0 / lam), **kw)

    def batch_for(self, m: int) -> int:
        return self.batch_size if self.batch_size is not None else default_batch_size(m)


@dataclass(frozen=True)
class DppsgdRun:
    """Intermediate quantities of one training run (before and after noise)."""

    w_sgd: np.ndarray
    noise: np.ndarray
    bounds: LossBounds
    updates: int

    @property
    def released(self) -> np.ndarray:
        return self.w_sgd + self.noise


def psgd_epoch(w, data: PartnerDataset, hp: DppsgdHyperparams, bounds: LossBounds,
               rng: np.random.Generator, t: int = 0, backend=None) -> tuple[np.ndarray, int]:
    """One permutation pass of projected mini-batch SGD.

    Returns the new weights and the global update count (``t`` plus the
    number of batches processed). The last batch may be short.
    """
    check_normalized(data)
    w = np.array(w, dtype=np.float64)
    perm = rng.permutation(data.m).astype(np.int64)
    cfg = hp.loss_cfg
    t = _backend.get(backend).psgd_epoch(
        w, data.X, data.y, perm, hp.batch_for(data.m), cfg.C, cfg.lam,
        bounds.beta, bounds.gamma, cfg.R, int(t),
    )
    return w, int(t)


def fit_psgd(data: PartnerDataset, hp: DppsgdHyperparams, rng: np.random.Generator, backend=None) -> tuple[np.ndarray, int]:
    """Noise-free part of DPPSGD: zero start, ``hp.epochs`` passes, final projection."""
    bounds = derive_bounds(hp.loss_cfg)
    w = np.zeros(data.X.shape[1])
    t = 0
    for _ in range(hp.epochs):
        w, t = psgd_epoch(w, data, hp, bounds, rng, t, backend=backend)
    return project_to_ball(w, hp.loss_cfg.R), t


def dppsgd_run(data: PartnerDataset, hp: DppsgdHyperparams, rng: np.random.Generator | None = None,
               noise_rng: np.random.Generator | None = None, backend=None) -> DppsgdRun:
    """Train and perturb, keeping the pieces apart.

    Without explicit generators the SGD permutations come from
    ``child_rng(hp.seed, "sgd")`` and the noise from
    ``child_rng(hp.seed, "noise")``.
    """
    if rng is None:
        rng = child_rng(hp.seed, "sgd")
    if noise_rng is None:
        noise_rng = child_rng(hp.seed, "noise")
    w, t = fit_psgd(data, hp, rng, backend=backend)
    bounds = derive_bounds(hp.loss_cfg)
    bounds = bounds.with_sensitivity(dppsgd_sensitivity(bounds, data.m, hp.batch_for(data.m)))
    if hp.budget.is_noise_free:
        noise = np.zeros_like(w)
    else:
        noise = sample_l2_laplace(w.shape[0], bounds.delta2, hp.budget.epsilon, noise_rng)
    return DppsgdRun(w_sgd=w, noise=noise, bounds=bounds, updates=t)


def _label_warnings(data: PartnerDataset) -> tuple[str, ...]:
    return (DEGENERATE_LABELS,) if np.unique(data.y).shape[0] < 2 else ()


def train_dppsgd(data: PartnerDataset, hp: DppsgdHyperparams, rng: np.random.Generator | None = None,
                 backend=None) -> PrivateModel:
    """Release a DPPSGD model; bit-identical for identical data and ``hp.seed``.

    Passing ``rng`` makes both the permutations and the noise come from that
    one generator (used by the privacy audit to avoid per-call seeding).
    """
    run = dppsgd_run(data, hp, rng=rng, noise_rng=rng, backend=backend)
    algorithm = Algorithm.NON_PRIVATE if hp.budget.is_noise_free else Algorithm.DPPSGD
    return PrivateModel(
        weights=run.released,
        algorithm=algorithm,
        budget=hp.budget,
        partner_id=data.partner_id,
        seed=hp.seed,
        C=hp.loss_cfg.C,
        warnings=_label_warnings(data),
    )


def train_non_private(data: PartnerDataset, hp: DppsgdHyperparams, backend=None) -> PrivateModel:
    """The same SGD with the noise switched off (the non-private baseline)."""
    return train_dppsgd(data, replace(hp, budget=NO_PRIVACY), backend=backend)


def tune_C(public_data: PartnerDataset, grid, hp_template: DppsgdHyperparams,
           val_fraction: float = 0.2, seed: int | None = None) -> float:
    """Pick ``C`` from ``grid`` by validation AUC of non-private models.

    Only the target partner's own data is used. The grid is scanned in
    ascending order with a strict comparison, so ties go to the smallest C
    and the result does not depend on the grid's order.
    """
    grid = sorted({float(c) for c in grid})
    if not grid:
        raise ConfigurationError("C grid is empty")
    if len(grid) == 1:
        return grid[0]
    seed = hp_template.seed if seed is None else seed
    train, val = train_test_split(public_data, val_fraction, child_rng(seed, "tune-split"))
    best_C, best_auc = grid[0], -math.inf
    for C in grid:
        hp = replace(hp_template, loss_cfg=replace(hp_template.loss_cfg, C=C), budget=NO_PRIVACY)
        model = train_dppsgd(train, hp)
        score = auc(val.X @ model.weights, val.y)
        if score > best_auc:
            best_C, best_auc = C, score
    return best_C

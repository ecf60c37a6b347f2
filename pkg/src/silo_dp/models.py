from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core_math import sigmoid
from .errors import DimensionError
from .privacy_noise import PrivacyBudget


class Algorithm(str, Enum):
    DPPSGD = "DPPSGD"
    AMP = "AMP"
    NON_PRIVATE = "NON_PRIVATE"


@dataclass(frozen=True, eq=False)
class PrivateModel:
    """Released logistic-regression weights plus privacy metadata.

    For DPPSGD and AMP the weights are the perturbed release, never the raw
    optimum.
    """

    weights: np.ndarray
    algorithm: Algorithm
    budget: PrivacyBudget
    partner_id: str
    seed: int
    C: float | None = None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("model weights must be a finite 1-D vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionError(f"model expects {self.dim} columns, data has shape {X.shape}")
        return sigmoid(X @ self.weights)

    def to_dict(self) -> dict:
        eps = self.budget.epsilon
        return {
            "partner_id": self.partner_id,
            "algorithm": self.algorithm.value,
            "epsilon": "inf" if math.isinf(eps) else eps,
            "delta": self.budget.delta,
            "seed": self.seed,
            "C": self.C,
            "warnings": list(self.warnings),
            "weights": [float(v) for v in self.weights],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrivateModel":
        eps = math.inf if d["epsilon"] == "inf" else float(d["epsilon"])
        return cls(
            weights=np.array(d["weights"], dtype=np.float64),
            algorithm=Algorithm(d["algorithm"]),
            budget=PrivacyBudget(eps, float(d["delta"])),
            partner_id=d["partner_id"],
            seed=int(d["seed"]),
            C=d.get("C"),
            warnings=tuple(d.get("warnings", ())),
        )

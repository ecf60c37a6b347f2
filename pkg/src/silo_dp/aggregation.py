"""Stacked ensemble over partners' private models.

Each base model turns the target partner's records into one probability
column; a gradient-boosted stacker learns the target's labels from those
columns. Aggregation only ever receives model weights, never other
partners' records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_math import sigmoid
from .errors import DimensionError, PreconditionError, SchemaError
from .gbdt import Forest, GbdtParams, fit_gbdt
from .models import PrivateModel

FORMAT_NAME = "silo-dp-ensemble"
FORMAT_VERSION = 1
MIN_STACKER_ROWS = 10


@dataclass(eq=False)
class EnsembleModel:
    base_models: tuple[PrivateModel, ...]
    stacker: Forest
    target_partner: str

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "target_partner": self.target_partner,
            "base_models": [m.to_dict() for m in self.base_models],
            "stacker": self.stacker.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleModel":
        if d.get("format") != FORMAT_NAME:
            raise SchemaError(f"not an ensemble document (format={d.get('format')!r})")
        if d.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported ensemble version {d.get('version')!r}")
        return cls(
            base_models=tuple(PrivateModel.from_dict(m) for m in d["base_models"]),
            stacker=Forest.from_dict(d["stacker"]),
            target_partner=d["target_partner"],
        )


def build_stack_features(X, models: Sequence[PrivateModel]) -> np.ndarray:
    """Column ``k`` holds ``sigmoid(X @ w_k)`` for the k-th model, in order."""
    X = np.asarray(X, dtype=np.float64)
    if not models:
        raise PreconditionError("need at least one base model")
    dims = {m.dim for m in models}
    if len(dims) != 1:
        raise DimensionError(f"base models disagree on dimension: {sorted(dims)}")
    (dim,) = dims
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionError(f"models expect {dim} columns, data has shape {X.shape}")
    W = np.stack([m.weights for m in models], axis=1)
    return sigmoid(X @ W)


def train_stacker(features, y, params: GbdtParams = GbdtParams(), seed: int = 0, backend=None) -> Forest:
    """Fit the boosted stacker. ``seed`` is accepted for interface symmetry;
    the booster has no randomness."""
    features = np.asarray(features)
    if features.shape[0] < MIN_STACKER_ROWS:
        raise PreconditionError(f"stacker needs at least {MIN_STACKER_ROWS} rows, got {features.shape[0]}")
    return fit_gbdt(features, y, params, backend=backend)


def build_ensemble(target_partner: str, X_train, y_train, models: Sequence[PrivateModel],
                   params: GbdtParams = GbdtParams(), seed: int = 0, backend=None) -> EnsembleModel:
    features = build_stack_features(X_train, models)
    stacker = train_stacker(features, y_train, params, seed=seed, backend=backend)
    return EnsembleModel(tuple(models), stacker, target_partner)


def predict_ensemble(ens: EnsembleModel, X) -> np.ndarray:
    return ens.stacker.predict_proba(build_stack_features(X, ens.base_models))


def save_ensemble(ens: EnsembleModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ens.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_ensemble(path) -> EnsembleModel:
    with open(path, encoding="utf-8") as fh:
        return EnsembleModel.from_dict(json.load(fh))

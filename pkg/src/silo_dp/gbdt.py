"""Minimal gradient-boosted trees for binary labels.

Logistic loss, exact greedy splits scored with the second-order structure
gain, Newton leaf values ``-G / (H + reg_lambda)``, shrinkage by the
learning rate. Defaults follow the usual XGBoost defaults (100 rounds,
depth 6, eta 0.3, min_child_weight 1, lambda 1).

Training is deterministic and invariant to the order of the training rows:
each feature's sort order breaks ties by the whole row, so every gradient
sum adds the same numbers in the same order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core_math import sigmoid
from .errors import ConfigurationError, DimensionError, PreconditionError


@dataclass(frozen=True)
class GbdtParams:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0

    def __post_init__(self):
        if self.n_rounds < 0 or self.max_depth < 1:
            raise ConfigurationError("n_rounds must be >= 0 and max_depth >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ConfigurationError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.min_child_weight < 0 or self.reg_lambda < 0:
            raise ConfigurationError("min_child_weight and reg_lambda must be >= 0")


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] < threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.maximum(f, 0)] < self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            value=np.array(d["value"], dtype=np.float64),
        )

    def same_as(self, other: "Tree") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "value")
        )


@dataclass(eq=False)
class Forest:
    base_score: float
    learning_rate: float
    trees: list[Tree]
    params: GbdtParams
    n_features: int
    warnings: tuple[str, ...] = ()
    train_margin: np.ndarray | None = field(default=None, repr=False)

    def margin(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=np.float64)
        if F.ndim != 2 or F.shape[1] != self.n_features:
            raise DimensionError(f"forest expects {self.n_features} features, got shape {F.shape}")
        score = np.full(F.shape[0], self.base_score)
        for tree in self.trees:
            score = score + self.learning_rate * tree.value[tree.apply(F)]
        return score

    def predict_proba(self, F) -> np.ndarray:
        return sigmoid(self.margin(F))

    def same_as(self, other: "Forest") -> bool:
        return (
            self.base_score == other.base_score
            and self.learning_rate == other.learning_rate
            and len(self.trees) == len(other.trees)
            and all(a.same_as(b) for a, b in zip(self.trees, other.trees))
        )

    def to_dict(self) -> dict:
        p = self.params
        return {
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "params": {
                "n_rounds": p.n_rounds,
                "max_depth": p.max_depth,
                "learning_rate": p.learning_rate,
                "min_child_weight": p.min_child_weight,
                "reg_lambda": p.reg_lambda,
            },
            "warnings": list(self.warnings),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls(
            base_score=float(d["base_score"]),
            learning_rate=float(d["learning_rate"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            params=GbdtParams(**d["params"]),
            n_features=int(d["n_features"]),
            warnings=tuple(d.get("warnings", ())),
        )


def logistic_loss(margin, y) -> float:
    """Mean logistic loss of raw margins."""
    return float(np.mean(np.log1p(np.exp(-np.abs(margin))) + np.maximum(margin, 0.0) - margin * y))


def canonical_orders(F: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-feature row orders, ties broken by the full row then the label."""
    n, k = F.shape
    full_rank = np.empty(n, dtype=np.int64)
    full_rank[np.lexsort((y,) + tuple(F[:, j] for j in reversed(range(k))))] = np.arange(n)
    orders = np.empty((k, n), dtype=np.int64)
    for j in range(k):
        orders[j] = np.lexsort((full_rank, F[:, j]))
    return orders


def fit_gbdt(F, y, params: GbdtParams = GbdtParams(), backend=None) -> Forest:
    """Boost ``params.n_rounds`` trees on features ``F`` and 0/1 labels ``y``."""
    F = np.ascontiguousarray(F, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if F.ndim != 2 or y.shape != (F.shape[0],):
        raise DimensionError(f"features {F.shape} do not match labels {y.shape}")
    if F.shape[0] == 0:
        raise PreconditionError("no training rows")
    rate = float(y.mean())
    if rate in (0.0, 1.0):
        warnings.warn("stacker labels have a single class; returning a constant model", stacklevel=2)
        clipped = min(max(rate, 1e-6), 1 - 1e-6)
        base = math.log(clipped / (1 - clipped))
        return Forest(base, params.learning_rate, [], params, F.shape[1], ("single-class-labels",),
                      np.full(F.shape[0], base))
    base = math.log(rate / (1.0 - rate))
    kernels = _backend.get(backend)
    orders = canonical_orders(F, y)
    score = np.full(F.shape[0], base)
    trees = []
    for _ in range(params.n_rounds):
        p = sigmoid(score)
        g = p - y
        h = p * (1.0 - p)
        feature, threshold, left, right, value, leaf = kernels.grow_tree(
            F, g, h, orders, params.max_depth, params.min_child_weight, params.reg_lambda
        )
        tree = Tree(np.asarray(feature), np.asarray(threshold), np.asarray(left), np.asarray(right), np.asarray(value))
        trees.append(tree)
        score = score + params.learning_rate * tree.value[np.asarray(leaf)]
    return Forest(base, params.learning_rate, trees, params, F.shape[1], (), score)

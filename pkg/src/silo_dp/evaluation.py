"""AUC, relative lift and cross-partner summaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, UndefinedMetricError

QUARTILE_METHOD = "linear"


def auc(scores, labels) -> float:
    """Mann-Whitney AUC from rank sums; tied scores get half credit."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DimensionError(f"{scores.shape[0]} scores for {labels.shape[0]} labels")
    if np.isnan(scores).any():
        raise UndefinedMetricError("scores contain NaN")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    # average 1-based rank of each tie group
    starts = np.cumsum(counts) - counts
    avg_rank = starts + (counts + 1) / 2.0
    rank_sum = float(avg_rank[inverse][pos].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def relative_lift(value: float, baseline: float) -> float:
    """Percent change of ``value`` over ``baseline``."""
    if not baseline > 0:
        raise ArithmeticError(f"baseline must be positive, got {baseline}")
    return 100.0 * (value - baseline) / baseline


def quartiles(values) -> dict[str, float]:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ConfigurationError("no values to summarize")
    q = np.percentile(values, [0, 25, 50, 75, 100], method=QUARTILE_METHOD)
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(v) for v in q)))


@dataclass
class PartnerStats:
    auc_mean: float
    auc_std: float
    n_values: int


@dataclass
class EvalReport:
    per_partner: dict[str, PartnerStats]
    summary: dict[str, float]
    lifts: dict[str, float] = field(default_factory=dict)
    baseline_name: str | None = None
    quartile_method: str = QUARTILE_METHOD

    def mean_auc(self) -> float:
        return float(np.mean([s.auc_mean for s in self.per_partner.values()]))

    def to_dict(self) -> dict:
        return {
            "per_partner": {
                k: {"auc_mean": s.auc_mean, "auc_std": s.auc_std, "n_values": s.n_values}
                for k, s in self.per_partner.items()
            },
            "summary": self.summary,
            "lifts": self.lifts,
            "baseline_name": self.baseline_name,
            "quartile_method": self.quartile_method,
        }


def summarize(per_partner_values: Mapping[str, Sequence[float]]) -> EvalReport:
    """Per-partner mean/std over all runs, plus quartiles of the partner means."""
    if not per_partner_values:
        raise ConfigurationError("summarize needs at least one partner")
    stats = {}
    for pid in sorted(per_partner_values):
        vals = np.asarray(per_partner_values[pid], dtype=np.float64)
        if vals.size == 0:
            raise ConfigurationError(f"partner {pid!r} has no values")
        stats[pid] = PartnerStats(float(vals.mean()), float(vals.std()), int(vals.size))
    summary = quartiles([s.auc_mean for s in stats.values()])
    summary["mean"] = float(np.mean([s.auc_mean for s in stats.values()]))
    return EvalReport(per_partner=stats, summary=summary)

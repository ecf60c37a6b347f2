"""Partner datasets: CSV I/O, norm-bounding normalization, synthetic silos, splits."""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    ConfigurationError,
    InvalidDatasetError,
    ParseError,
    PreconditionError,
    SchemaError,
)

DEFAULT_FEATURE_COUNT = 19


class Period(str, Enum):
    RAMPED_UP = "ramped"
    COLD_START = "cold"


@dataclass(frozen=True, eq=False)
class PartnerDataset:
    """One silo's records.

    Raw datasets hold ``d`` feature columns; normalized ones hold ``d + 1``
    (the last is the bias column) and every row has l2 norm at most 1.
    """

    partner_id: str
    X: np.ndarray
    y: np.ndarray
    period: Period
    normalized: bool = False

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise SchemaError(f"X must be 2-D with one label per row, got {X.shape} and {y.shape}")
        if X.shape[0] < 1:
            raise InvalidDatasetError(f"partner {self.partner_id!r} has no records")
        if not np.all((y == 0) | (y == 1)):
            raise ParseError("labels must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "period", Period(self.period))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1] - 1 if self.normalized else self.X.shape[1]

    @property
    def positive_rate(self) -> float:
        return float(self.y.mean())

    def subset(self, idx) -> "PartnerDataset":
        return replace(self, X=self.X[idx], y=self.y[idx])


@dataclass(frozen=True)
class NormalizationConfig:
    """Squared-norm outlier threshold ``t_norm`` and bias value ``v``."""

    t_norm: float
    v: float = 1.0

    def __post_init__(self):
        if not (self.t_norm > 0 and self.v > 0):
            raise ConfigurationError(f"t_norm and v must be > 0, got {self.t_norm}, {self.v}")

    @property
    def scale(self) -> float:
        return math.sqrt(self.t_norm) + self.v


# ---------------------------------------------------------------- CSV


def _period_from_filename(path) -> tuple[str, Period]:
    stem = os.path.splitext(os.path.basename(path))[0]
    partner, sep, tag = stem.rpartition("_")
    if not sep or not partner or tag not in {p.value for p in Period}:
        raise SchemaError(f"{path}: file name must look like <partner>_<ramped|cold>.csv")
    return partner, Period(tag)


def load_partner_csv(path, expected_d: int | None = None) -> PartnerDataset:
    """Read a raw ``f1..fd,label`` file named ``<partner>_<ramped|cold>.csv``.

    Row numbers in errors count data rows from 1 (the header is not counted).
    """
    partner, period = _period_from_filename(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise SchemaError(f"{path}: missing header row")
        d = len(header) - 1
        want = [f"f{j + 1}" for j in range(d)] + ["label"]
        if [c.strip() for c in header] != want:
            raise SchemaError(f"{path}: header must be f1..f{d},label")
        if expected_d is not None and d != expected_d:
            raise SchemaError(f"{path}: expected {expected_d} features, found {d}")
        rows, labels = [], []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != d + 1:
                raise SchemaError(f"{path}: row {rownum} has {len(row)} columns, expected {d + 1}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"{path}: non-numeric value in row {rownum}", row=rownum) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(f"{path}: non-finite value in row {rownum}", row=rownum)
            if values[-1] not in (0.0, 1.0):
                raise ParseError(f"{path}: label {row[-1]!r} in row {rownum} is not 0 or 1", row=rownum)
            rows.append(values[:-1])
            labels.append(values[-1])
    if not rows:
        raise InvalidDatasetError(f"{path}: no data rows")
    return PartnerDataset(partner, np.array(rows, dtype=np.float64), np.array(labels), period)


def write_partner_csv(data: PartnerDataset, out_dir) -> str:
    if data.normalized:
        raise PreconditionError("only raw datasets are written to CSV")
    path = os.path.join(out_dir, f"{data.partner_id}_{data.period.value}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j + 1}" for j in range(data.d)] + ["label"])
        for x, label in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in x] + [int(label)])
    return path


# ---------------------------------------------------------------- normalization


def normalize_records(X_raw, cfg: NormalizationConfig, d: int | None = None):
    """Drop rows with squared norm above ``t_norm``, append the bias, rescale.

    Every entry of a surviving row, bias included, is divided by
    ``sqrt(t_norm) + v``, which bounds the row's norm by 1. Returns the
    normalized matrix and the boolean mask of kept rows.
    """
    X_raw = np.asarray(X_raw, dtype=np.float64)
    if X_raw.ndim != 2:
        raise SchemaError(f"expected a 2-D matrix, got shape {X_raw.shape}")
    bias = cfg.v / cfg.scale
    if d is not None and X_raw.shape[1] == d + 1:
        raise PreconditionError("input already has a bias column; normalize raw records only")
    if X_raw.shape[0] and X_raw.shape[1] > 1 and np.all(X_raw[:, -1] == bias):
        raise PreconditionError("last column equals the bias value; records look normalized already")
    keep = np.sum(X_raw * X_raw, axis=1) <= cfg.t_norm
    if not keep.any():
        raise InvalidDatasetError("every record exceeded the outlier threshold")
    kept = X_raw[keep]
    out = np.empty((kept.shape[0], kept.shape[1] + 1))
    out[:, :-1] = kept / cfg.scale
    out[:, -1] = bias
    return out, keep


def check_normalized(data: PartnerDataset, tol: float = 1e-12) -> None:
    """Raise unless every row of ``data`` has l2 norm at most ``1 + tol``."""
    norms = np.sqrt(np.einsum("ij,ij->i", data.X, data.X))
    worst = float(norms.max())
    if worst > 1.0 + tol:
        raise PreconditionError(
            f"partner {data.partner_id!r}: record norm {worst:.6g} exceeds 1; normalize the data first"
        )


def normalize_dataset(data: PartnerDataset, cfg: NormalizationConfig) -> PartnerDataset:
    if data.normalized:
        raise PreconditionError(f"dataset {data.partner_id!r} is already normalized")
    X, keep = normalize_records(data.X, cfg)
    return replace(data, X=X, y=data.y[keep], normalized=True)


# ---------------------------------------------------------------- synthetic partners


@dataclass(frozen=True)
class LabelModel:
    """Logistic ground truth: ``weight_scale`` sets the norm of the shared
    weights, ``intercept`` the base log-odds."""

    weight_scale: float = 1.5
    intercept: float = -1.0


@dataclass(frozen=True)
class GeneratorConfig:
    n_partners: int = 38
    d: int = DEFAULT_FEATURE_COUNT
    size_range: tuple[float, float] = (2000, 20000)
    cold_fraction: float = 1.0 / 12.0
    min_cold_size: int = 60
    shift_scale: float = 0.3
    label_model: LabelModel = field(default_factory=LabelModel)

    def __post_init__(self):
        lo, hi = self.size_range
        if self.n_partners < 2:
            raise ConfigurationError(f"need at least 2 partners, got {self.n_partners}")
        if self.d < 1 or not 2 <= lo <= hi:
            raise ConfigurationError(f"invalid d={self.d} or size_range={self.size_range}")
        if not 0 < self.cold_fraction < 1 or self.shift_scale < 0 or self.min_cold_size < 2:
            raise ConfigurationError("cold_fraction must be in (0,1), shift_scale >= 0, min_cold_size >= 2")


def partner_ids(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"p{k:0{width}d}" for k in range(n)]


def generate_synthetic_partners(cfg: GeneratorConfig, seed: int) -> list[tuple[PartnerDataset, PartnerDataset]]:
    """Draw ``(ramped_up, cold_start)`` raw dataset pairs for every partner.

    All partners share one logistic weight vector; each perturbs it, its
    intercept, and its feature mean and mixing matrix by ``shift_scale``
    times a standard normal draw. Ramped-up sizes are log-uniform in
    ``size_range``; the cold-start set is a uniform subsample of the
    ramped-up pool.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x5E11,)))
    d, lm = cfg.d, cfg.label_model
    w_global = rng.standard_normal(d) * (lm.weight_scale / math.sqrt(d))
    lo, hi = cfg.size_range
    out = []
    for pid in partner_ids(cfg.n_partners):
        s = cfg.shift_scale
        w_k = w_global + s * rng.standard_normal(d) * (lm.weight_scale / math.sqrt(d))
        b_k = lm.intercept + 0.5 * s * rng.standard_normal()
        mu_k = 0.5 * s * rng.standard_normal(d)
        mix_k = np.eye(d) + 0.5 * s * rng.standard_normal((d, d)) / math.sqrt(d)
        m = int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))
        X = mu_k + rng.standard_normal((m, d)) @ mix_k
        p = 1.0 / (1.0 + np.exp(-(X @ w_k + b_k)))
        y = (rng.random(m) < p).astype(np.float64)
        m_cold = min(m, max(cfg.min_cold_size, int(round(cfg.cold_fraction * m))))
        cold_idx = np.sort(rng.choice(m, size=m_cold, replace=False))
        out.append((
            PartnerDataset(pid, X, y, Period.RAMPED_UP),
            PartnerDataset(pid, X[cold_idx], y[cold_idx], Period.COLD_START),
        ))
    return out


def reference_t_norm(d: int = DEFAULT_FEATURE_COUNT, quantile: float = 0.99, n: int = 100_000, seed: int = 0) -> float:
    """Outlier threshold from a public reference population.

    The reference is the unshifted synthetic feature distribution (standard
    normal in ``d`` dimensions); no partner data is consulted.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x7E7,)))
    Z = rng.standard_normal((n, d))
    return float(np.quantile(np.sum(Z * Z, axis=1), quantile))


# ---------------------------------------------------------------- splitting


def train_test_split(data: PartnerDataset, test_fraction: float, seed) -> tuple[PartnerDataset, PartnerDataset]:
    """Disjoint, exhaustive, label-stratified split.

    The test size is ``round(test_fraction * m)`` and is shared between the
    classes by largest remainder. ``seed`` may be an int or a Generator.
    """
    if not 0 < test_fraction < 1:
        raise ConfigurationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    m = data.m
    if m < 2:
        raise InvalidDatasetError("need at least 2 records to split")
    rng = np.random.default_rng(seed)
    n_test = min(m - 1, max(1, int(round(test_fraction * m))))
    classes = [np.flatnonzero(data.y == c) for c in (0.0, 1.0)]
    if min(len(c) for c in classes) < 2:
        warnings.warn(
            f"partner {data.partner_id!r}: a class has fewer than 2 records; using an unstratified split",
            stacklevel=2,
        )
        test_idx = rng.permutation(m)[:n_test]
    else:
        exact = [n_test * len(c) / m for c in classes]
        alloc = [int(math.floor(e)) for e in exact]
        for k in sorted(range(2), key=lambda k: (alloc[k] - exact[k], k))[: n_test - sum(alloc)]:
            alloc[k] += 1
        # keep one record of each class on the training side
        alloc = [min(a, len(c) - 1) for a, c in zip(alloc, classes)]
        test_idx = np.concatenate([rng.permutation(c)[:a] for c, a in zip(classes, alloc)])
    mask = np.zeros(m, dtype=bool)
    mask[test_idx] = True
    return data.subset(np.flatnonzero(~mask)), data.subset(np.flatnonzero(mask))

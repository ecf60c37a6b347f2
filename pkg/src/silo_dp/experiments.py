"""Experiment harness: baselines, the three experiments, and the privacy audit.

Every random choice is drawn from ``child_rng(config.seed, *keys)`` with keys
naming the partner, split and draw, so reruns are byte-identical and work
items do not share streams. Work runs sequentially; report assembly is a
plain reduction over the per-item results.
"""

from __future__ import annotations

import csv
import dataclasses
import glob
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
import yaml

from .aggregation import build_ensemble, predict_ensemble
from .amp import AmpHyperparams, train_amp
from .audit import (
    dppsgd_first_coordinate,
    empirical_dp_check,
    noise_free_mean,
    randomized_response,
    toy_neighbors,
)
from .core_math import derive_bounds
from .data import (
    GeneratorConfig,
    LabelModel,
    NormalizationConfig,
    PartnerDataset,
    generate_synthetic_partners,
    load_partner_csv,
    normalize_dataset,
    reference_t_norm,
    train_test_split,
    write_partner_csv,
)
from .dppsgd import DEFAULT_C_GRID, DEFAULT_LAMBDA, DppsgdHyperparams, train_dppsgd, train_non_private, tune_C
from .errors import ConfigurationError, InvalidDatasetError
from .evaluation import QUARTILE_METHOD, auc, quartiles, relative_lift, summarize
from .gbdt import GbdtParams
from .models import PrivateModel
from .privacy_noise import PrivacyBudget, child_rng, child_seed, dppsgd_sensitivity, sample_l2_laplace

log = logging.getLogger(__name__)

ALGORITHMS = ("DPPSGD", "AMP")
NO_NOISE = "no-noise"


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    epsilon_grid: tuple[float, ...] = (1e-6, 1e-4, 1e-2, 0.1, 0.4)
    include_no_noise: bool = True
    epsilon_main: float = 0.01
    n_splits: int = 10
    n_noise_draws: int = 100
    n_aggregation_draws: int = 1
    partner_counts: tuple[int, ...] = (5, 10, 15, 20, 25, 30, 35)
    n_subsample_repeats: int = 100
    algorithm: str = "DPPSGD"  # DPPSGD, AMP or BOTH
    test_fraction: float = 0.2
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    lam: float = DEFAULT_LAMBDA
    amp_frac_obj: float = 0.99
    t_norm: float | None = None  # None: derived from a public reference population
    bias: float = 1.0
    target_model: str = "private"  # or "non_private" (the target's own data is public to it)
    ramped_variant: bool = True
    ramped_variant_splits: int = 1  # the variant's stackers train on full ramped-up splits
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    gbdt: GbdtParams = field(default_factory=GbdtParams)
    data_dir: str | None = None
    audit_trials: int = 100_000
    audit_bins: int = 30
    audit_epsilon: float = 0.5

    def __post_init__(self):
        counts = {
            "n_splits": self.n_splits,
            "n_noise_draws": self.n_noise_draws,
            "n_aggregation_draws": self.n_aggregation_draws,
            "n_subsample_repeats": self.n_subsample_repeats,
            "audit_trials": self.audit_trials,
            "audit_bins": self.audit_bins,
            "ramped_variant_splits": self.ramped_variant_splits,
        }
        for name, v in counts.items():
            if not (isinstance(v, int) and v >= 1):
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        eps = tuple(self.epsilon_grid) + (self.epsilon_main, self.audit_epsilon)
        if not all(isinstance(e, (int, float)) and 0 < e < math.inf for e in eps):
            raise ConfigurationError(f"epsilon values must be finite and > 0, got {eps}")
        if self.algorithm not in ALGORITHMS + ("BOTH",):
            raise ConfigurationError(f"algorithm must be DPPSGD, AMP or BOTH, got {self.algorithm!r}")
        if self.target_model not in ("private", "non_private"):
            raise ConfigurationError(f"target_model must be 'private' or 'non_private', got {self.target_model!r}")
        if not all(isinstance(k, int) and k >= 2 for k in self.partner_counts):
            raise ConfigurationError(f"partner_counts must be integers >= 2, got {self.partner_counts}")
        if not 0 < self.test_fraction < 1:
            raise ConfigurationError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if not self.c_grid or not all(c > 0 for c in self.c_grid):
            raise ConfigurationError("c_grid must be a non-empty list of positive values")
        if self.t_norm is not None and not self.t_norm > 0:
            raise ConfigurationError(f"t_norm must be > 0, got {self.t_norm}")

    @property
    def algorithms(self) -> tuple[str, ...]:
        return ALGORITHMS if self.algorithm == "BOTH" else (self.algorithm,)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


_TUPLE_FIELDS = ("epsilon_grid", "partner_counts", "c_grid")


def config_from_mapping(raw: dict | None) -> ExperimentConfig:
    raw = dict(raw or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {unknown}")
    try:
        if "generator" in raw:
            gen = dict(raw["generator"] or {})
            if "label_model" in gen:
                gen["label_model"] = LabelModel(**gen["label_model"])
            if "size_range" in gen:
                gen["size_range"] = tuple(gen["size_range"])
            raw["generator"] = GeneratorConfig(**gen)
        if "gbdt" in raw:
            raw["gbdt"] = GbdtParams(**(raw["gbdt"] or {}))
        for name in _TUPLE_FIELDS:
            if name in raw:
                raw[name] = tuple(raw[name])
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigurationError(f"invalid config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON) config mirroring ``ExperimentConfig``'s fields."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must be a mapping")
    return config_from_mapping(raw)


# ---------------------------------------------------------------- reports


def _plain(obj):
    """JSON-ready copy: tuples to lists, numpy scalars to Python, inf to a string."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class Report:
    command: str
    tables: dict[str, tuple[list[str], list[list]]]
    summary: dict

    def write(self, out_dir) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for name, (header, rows) in self.tables.items():
            path = os.path.join(out_dir, f"{name}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([_cell(v) for v in row])
            paths.append(path)
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_plain(self.summary), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        paths.append(path)
        return paths


# ---------------------------------------------------------------- partner data


@dataclass(frozen=True)
class Partner:
    pid: str
    ramped: PartnerDataset
    cold: PartnerDataset


def load_raw_partners(cfg: ExperimentConfig) -> list[tuple[PartnerDataset, PartnerDataset]]:
    if cfg.data_dir is None:
        return generate_synthetic_partners(cfg.generator, cfg.seed)
    ramped_files = sorted(glob.glob(os.path.join(cfg.data_dir, "*_ramped.csv")))
    if not ramped_files:
        raise InvalidDatasetError(f"no <partner>_ramped.csv files in {cfg.data_dir}")
    pairs = []
    d = None
    for path in ramped_files:
        ramped = load_partner_csv(path, expected_d=d)
        d = ramped.d
        cold_path = path[: -len("_ramped.csv")] + "_cold.csv"
        if not os.path.exists(cold_path):
            raise InvalidDatasetError(f"missing cold-start file {cold_path}")
        pairs.append((ramped, load_partner_csv(cold_path, expected_d=d)))
    if len(pairs) < 2:
        raise InvalidDatasetError("need at least 2 partners")
    return pairs


def prepare_partners(cfg: ExperimentConfig) -> tuple[list[Partner], NormalizationConfig]:
    pairs = load_raw_partners(cfg)
    d = pairs[0][0].d
    t_norm = cfg.t_norm if cfg.t_norm is not None else reference_t_norm(d)
    norm = NormalizationConfig(t_norm, cfg.bias)
    partners = [
        Partner(r.partner_id, normalize_dataset(r, norm), normalize_dataset(c, norm)) for r, c in pairs
    ]
    return partners, norm


# ---------------------------------------------------------------- shared building blocks


@dataclass
class BaselineFit:
    model: PrivateModel
    C: float
    train: PartnerDataset
    test: PartnerDataset
    auc: float


class Harness:
    """Runs experiments over one set of partners, memoizing shared fits.

    Baselines and private models are cached by the keys that seed them, so
    a value is computed once per run no matter how many experiments use it.
    """

    def __init__(self, cfg: ExperimentConfig, partners: list[Partner] | None = None):
        self.cfg = cfg
        if partners is None:
            partners, self.norm = prepare_partners(cfg)
        else:
            self.norm = None
        self.partners = partners
        self.by_id = {p.pid: p for p in partners}
        self._baselines: dict[tuple, BaselineFit] = {}
        self._private: dict[tuple, PrivateModel] = {}

    # -- splits and baselines

    def split(self, data: PartnerDataset, split: int, tag: str):
        rng = child_rng(self.cfg.seed, "split", data.partner_id, tag, split)
        return train_test_split(data, self.cfg.test_fraction, rng)

    def _fit_non_private(self, train: PartnerDataset, tag: str, split: int) -> tuple[PrivateModel, float]:
        cfg = self.cfg
        template = DppsgdHyperparams.with_C(cfg.c_grid[0], lam=cfg.lam,
                                            seed=child_seed(cfg.seed, "sgd", train.partner_id, tag, split))
        C = tune_C(train, cfg.c_grid, template, seed=child_seed(cfg.seed, "tune", train.partner_id, tag, split))
        model = train_non_private(train, replace(template, loss_cfg=replace(template.loss_cfg, C=C)))
        return model, C

    def cold_baseline(self, pid: str, split: int) -> BaselineFit:
        """Non-private model on the cold-start training split, scored on its test split."""
        key = ("cold", pid, split)
        if key not in self._baselines:
            train, test = self.split(self.by_id[pid].cold, split, "cold")
            model, C = self._fit_non_private(train, "cold", split)
            self._baselines[key] = BaselineFit(model, C, train, test, auc(test.X @ model.weights, test.y))
        return self._baselines[key]

    def ramped_baseline(self, pid: str, split: int) -> BaselineFit:
        """Non-private model on the ramped-up training split, scored on its test split."""
        key = ("ramped", pid, split)
        if key not in self._baselines:
            train, test = self.split(self.by_id[pid].ramped, split, "ramped")
            model, C = self._fit_non_private(train, "ramped", split)
            self._baselines[key] = BaselineFit(model, C, train, test, auc(test.X @ model.weights, test.y))
        return self._baselines[key]

    def ramped_on_cold_test(self, pid: str, split: int) -> float:
        """AUC on the cold-start test split of a non-private model trained on
        the partner's ramped-up records, minus any record of that test split."""
        key = ("ramped-vs-cold", pid, split)
        if key not in self._baselines:
            cold = self.cold_baseline(pid, split)
            ramped = self.by_id[pid].ramped
            train = ramped.subset(np.flatnonzero(~_rows_in(ramped, cold.test)))
            model, C = self._fit_non_private(train, "ramped-excl", split)
            self._baselines[key] = BaselineFit(model, C, train, cold.test,
                                               auc(cold.test.X @ model.weights, cold.test.y))
        return self._baselines[key].auc

    # -- private models

    def private_model(self, algorithm: str, data: PartnerDataset, C: float, epsilon: float, keys: tuple) -> PrivateModel:
        cfg = self.cfg
        key = (algorithm, data.partner_id, data.period.value, C, epsilon) + keys
        if key not in self._private:
            seed = child_seed(cfg.seed, "private", algorithm, data.partner_id, data.period.value, *keys)
            if algorithm == "DPPSGD":
                hp = DppsgdHyperparams.with_C(C, lam=cfg.lam, budget=PrivacyBudget(epsilon, 0.0), seed=seed)
                model = train_dppsgd(data, hp)
            else:
                hp = AmpHyperparams.for_size(data.m, epsilon, frac_obj=cfg.amp_frac_obj, seed=seed)
                model = train_amp(data, hp)
            self._private[key] = model
        return self._private[key]

    def target_model(self, algorithm: str, fit: BaselineFit, epsilon: float, keys: tuple) -> PrivateModel:
        if self.cfg.target_model == "non_private":
            return fit.model
        return self.private_model(algorithm, fit.train, fit.C, epsilon, keys)

    def ensemble_auc(self, target: PrivateModel, others: Iterable[PrivateModel], train, test) -> float:
        ens = build_ensemble(train.partner_id, train.X, train.y, [target, *others], self.cfg.gbdt)
        return auc(predict_ensemble(ens, test.X), test.y)


def _rows_in(data: PartnerDataset, probe: PartnerDataset) -> np.ndarray:
    """Mask of rows of ``data`` whose features and label appear in ``probe``."""
    seen = {r.tobytes() for r in np.column_stack([probe.X, probe.y])}
    return np.array([r.tobytes() in seen for r in np.column_stack([data.X, data.y])], dtype=bool)


def _fmt_eps(eps: float) -> str:
    return NO_NOISE if math.isinf(eps) else repr(float(eps))


def _base_summary(command: str, cfg: ExperimentConfig, h: Harness | None = None) -> dict:
    out = {"command": command, "config": cfg.to_dict(), "quartile_method": QUARTILE_METHOD}
    if h is not None:
        out["n_partners"] = len(h.partners)
        if h.norm is not None:
            out["normalization"] = {"t_norm": h.norm.t_norm, "bias": h.norm.v}
    return out


# ---------------------------------------------------------------- commands


def run_generate(cfg: ExperimentConfig, out_dir) -> Report:
    """Write the synthetic partners as raw CSV files under ``out_dir/data``."""
    pairs = generate_synthetic_partners(cfg.generator, cfg.seed)
    data_dir = os.path.join(out_dir, "data")
    os.makedirs(data_dir, exist_ok=True)
    rows = []
    for ramped, cold in pairs:
        write_partner_csv(ramped, data_dir)
        write_partner_csv(cold, data_dir)
        rows.append([ramped.partner_id, ramped.m, cold.m, ramped.positive_rate, cold.positive_rate])
    header = ["partner", "ramped_size", "cold_size", "ramped_positive_rate", "cold_positive_rate"]
    summary = _base_summary("generate", cfg)
    summary.update(n_partners=len(pairs), total_ramped=sum(r[1] for r in rows), total_cold=sum(r[2] for r in rows))
    return Report("generate", {"partners": (header, rows)}, summary)


def run_baselines(cfg: ExperimentConfig, harness: Harness | None = None) -> Report:
    """Non-private SGD baselines on each partner's cold-start and ramped-up data."""
    h = harness or Harness(cfg)
    rows = []
    reports = {}
    for period in ("cold", "ramped"):
        values = {}
        for p in h.partners:
            fits = [(h.cold_baseline if period == "cold" else h.ramped_baseline)(p.pid, s) for s in range(cfg.n_splits)]
            values[p.pid] = [f.auc for f in fits]
        rep = summarize(values)
        reports[period] = rep
        for pid, st in rep.per_partner.items():
            rows.append([period, pid, st.auc_mean, st.auc_std, st.n_values])
    summary = _base_summary("baseline", cfg, h)
    summary["cold"] = reports["cold"].summary
    summary["ramped"] = reports["ramped"].summary
    summary["ramped_minus_cold_mean"] = reports["ramped"].mean_auc() - reports["cold"].mean_auc()
    header = ["period", "partner", "auc_mean", "auc_std", "n_values"]
    return Report("baseline", {"baselines": (header, rows)}, summary)


def run_experiment1(cfg: ExperimentConfig, harness: Harness | None = None) -> Report:
    """Per-partner AUC of individual private models across the epsilon grid.

    For DPPSGD the noise draws are coupled across epsilon: draw ``k`` of
    partner ``p`` on split ``s`` uses the same generator for every epsilon,
    so the noise vectors differ only by their scale. This isolates the effect
    of epsilon from sampling variation.
    """
    h = harness or Harness(cfg)
    grid = sorted(cfg.epsilon_grid) + ([math.inf] if cfg.include_no_noise else [])
    per_rows, q_rows = [], []
    summary = _base_summary("exp1", cfg, h)
    summary["mean_auc"] = {}
    for algo in cfg.algorithms:
        values = {eps: {} for eps in grid}
        for p in h.partners:
            for eps in grid:
                values[eps][p.pid] = []
            for s in range(cfg.n_splits):
                base = h.cold_baseline(p.pid, s)
                train, test = base.train, base.test
                for eps in grid:
                    if math.isinf(eps):
                        values[eps][p.pid].append(base.auc)
                if algo == "DPPSGD":
                    hp = DppsgdHyperparams.with_C(base.C, lam=cfg.lam)
                    bounds = derive_bounds(hp.loss_cfg)
                    delta2 = dppsgd_sensitivity(bounds, train.m, hp.batch_for(train.m))
                    for k in range(cfg.n_noise_draws):
                        for eps in grid:
                            if math.isinf(eps):
                                continue
                            rng = child_rng(cfg.seed, "exp1-noise", p.pid, s, k)
                            w = base.model.weights + sample_l2_laplace(train.X.shape[1], delta2, eps, rng)
                            values[eps][p.pid].append(auc(test.X @ w, test.y))
                else:
                    for k in range(cfg.n_noise_draws):
                        for eps in grid:
                            if math.isinf(eps):
                                continue
                            seed = child_seed(cfg.seed, "exp1-amp", p.pid, s, k)
                            hp = AmpHyperparams.for_size(train.m, eps, frac_obj=cfg.amp_frac_obj, seed=seed)
                            w = train_amp(train, hp).weights
                            values[eps][p.pid].append(auc(test.X @ w, test.y))
            log.info("exp1 %s partner %s done", algo, p.pid)
        means = {}
        for eps in grid:
            rep = summarize(values[eps])
            means[_fmt_eps(eps)] = rep.summary["mean"]
            q = rep.summary
            q_rows.append([algo, _fmt_eps(eps), q["min"], q["q1"], q["median"], q["q3"], q["max"], q["mean"]])
            for pid, st in rep.per_partner.items():
                per_rows.append([algo, _fmt_eps(eps), pid, st.auc_mean, st.auc_std, st.n_values])
        summary["mean_auc"][algo] = means
    tables = {
        "exp1_quartiles": (["algorithm", "epsilon", "min", "q1", "median", "q3", "max", "mean"], q_rows),
        "exp1_per_partner": (["algorithm", "epsilon", "partner", "auc_mean", "auc_std", "n_values"], per_rows),
    }
    return Report("exp1", tables, summary)


def run_experiment2(cfg: ExperimentConfig, harness: Harness | None = None) -> Report:
    """Aggregation lift for every target partner at ``epsilon_main``.

    The target contributes its cold-start model; every other partner
    contributes a model trained on its ramped-up data with the target's
    tuned C. The stacker sees only those models' predictions on the target's
    cold-start training split and is scored on the matching test split.
    """
    h = harness or Harness(cfg)
    eps = cfg.epsilon_main
    rows = []
    summary = _base_summary("exp2", cfg, h)
    summary["algorithms"] = {}
    for algo in cfg.algorithms:
        ens_auc = {p.pid: [] for p in h.partners}
        cold_auc = {p.pid: [] for p in h.partners}
        ramped_auc = {p.pid: [] for p in h.partners}
        rv_auc = {p.pid: [] for p in h.partners}
        rv_base = {p.pid: [] for p in h.partners}
        for s in range(cfg.n_splits):
            for r in range(cfg.n_aggregation_draws):
                for t in h.partners:
                    base = h.cold_baseline(t.pid, s)
                    target = h.target_model(algo, base, eps, (s, r))
                    others = [h.private_model(algo, o.ramped, base.C, eps, (s, r)) for o in h.partners if o.pid != t.pid]
                    ens_auc[t.pid].append(h.ensemble_auc(target, others, base.train, base.test))
                    if r == 0:
                        cold_auc[t.pid].append(base.auc)
                        ramped_auc[t.pid].append(h.ramped_on_cold_test(t.pid, s))
                    if cfg.ramped_variant and s < cfg.ramped_variant_splits:
                        rb = h.ramped_baseline(t.pid, s)
                        target_r = h.target_model(algo, rb, eps, (s, r))
                        others_r = [h.private_model(algo, o.ramped, rb.C, eps, (s, r))
                                    for o in h.partners if o.pid != t.pid]
                        rv_auc[t.pid].append(h.ensemble_auc(target_r, others_r, rb.train, rb.test))
                        if r == 0:
                            rv_base[t.pid].append(rb.auc)
            log.info("exp2 %s split %d done", algo, s)
        lifts_cold, lifts_ramped, lifts_rv = {}, {}, {}
        for p in h.partners:
            e = float(np.mean(ens_auc[p.pid]))
            c = float(np.mean(cold_auc[p.pid]))
            ru = float(np.mean(ramped_auc[p.pid]))
            lifts_cold[p.pid] = relative_lift(e, c)
            lifts_ramped[p.pid] = relative_lift(e, ru)
            row = [algo, p.pid, h.cold_baseline(p.pid, 0).train.m, e, c, ru, lifts_cold[p.pid], lifts_ramped[p.pid]]
            if cfg.ramped_variant:
                ev, bv = float(np.mean(rv_auc[p.pid])), float(np.mean(rv_base[p.pid]))
                lifts_rv[p.pid] = relative_lift(ev, bv)
                row += [ev, bv, lifts_rv[p.pid]]
            else:
                row += [math.nan, math.nan, math.nan]
            rows.append(row)
        block = {
            "epsilon": eps,
            "mean_lift_vs_cold": float(np.mean(list(lifts_cold.values()))),
            "mean_lift_vs_ramped": float(np.mean(list(lifts_ramped.values()))),
            "fraction_positive_vs_cold": float(np.mean([v > 0 for v in lifts_cold.values()])),
            "lift_vs_cold_quartiles": quartiles(list(lifts_cold.values())),
        }
        if cfg.ramped_variant:
            block["mean_lift_ramped_variant"] = float(np.mean(list(lifts_rv.values())))
            block["fraction_positive_ramped_variant"] = float(np.mean([v > 0 for v in lifts_rv.values()]))
        summary["algorithms"][algo] = block
    header = [
        "algorithm", "partner", "cold_train_size", "ensemble_auc",
        "cold_baseline_auc", "ramped_baseline_auc", "lift_vs_cold", "lift_vs_ramped",
        "ramped_variant_auc", "ramped_variant_baseline_auc", "lift_ramped_variant",
    ]
    return Report("exp2", {"exp2_lifts": (header, rows)}, summary)


def run_experiment3(cfg: ExperimentConfig, harness: Harness | None = None) -> Report:
    """Lift over the cold-start baseline as the number of aggregated partners varies.

    ``k`` counts the base models, the target's own included: each repeat
    draws a target and ``k - 1`` other partners at random.
    """
    h = harness or Harness(cfg)
    n = len(h.partners)
    if max(cfg.partner_counts) > n:
        raise ConfigurationError(f"partner_counts up to {max(cfg.partner_counts)} but only {n} partners")
    eps = cfg.epsilon_main
    detail, rows = [], []
    summary = _base_summary("exp3", cfg, h)
    summary["algorithms"] = {}
    for algo in cfg.algorithms:
        block = {}
        for k in sorted(cfg.partner_counts):
            lifts = []
            for r in range(cfg.n_subsample_repeats):
                rng = child_rng(cfg.seed, "exp3", k, r)
                t = int(rng.integers(n))
                rest = [i for i in range(n) if i != t]
                chosen = sorted(rng.choice(rest, size=k - 1, replace=False).tolist())
                s = r % cfg.n_splits
                target = h.partners[t]
                base = h.cold_baseline(target.pid, s)
                tm = h.target_model(algo, base, eps, (s, 0))
                others = [h.private_model(algo, h.partners[j].ramped, base.C, eps, (s, 0)) for j in chosen]
                lift = relative_lift(h.ensemble_auc(tm, others, base.train, base.test), base.auc)
                lifts.append(lift)
                detail.append([algo, k, r, target.pid, s, lift])
            mean, var = float(np.mean(lifts)), float(np.var(lifts, ddof=1)) if len(lifts) > 1 else 0.0
            rows.append([algo, k, len(lifts), mean, var])
            block[str(k)] = {"mean_lift": mean, "var_lift": var}
            log.info("exp3 %s k=%d done", algo, k)
        means = [v["mean_lift"] for v in block.values()]
        summary["algorithms"][algo] = {"per_k": block, "mean_lift_spread": max(means) - min(means)}
    tables = {
        "exp3_summary": (["algorithm", "k", "n_repeats", "mean_lift", "var_lift"], rows),
        "exp3_repeats": (["algorithm", "k", "repeat", "target", "split", "lift"], detail),
    }
    return Report("exp3", tables, summary)


def run_audit(cfg: ExperimentConfig) -> Report:
    """Empirical DP checks on reference mechanisms and a small DPPSGD instance."""
    trials, bins, seed = cfg.audit_trials, cfg.audit_bins, cfg.seed
    eps = cfg.audit_epsilon
    rr = randomized_response(1.0)
    D, D2 = toy_neighbors(seed=seed)
    cases = [
        ("randomized_response", 1.0, 1.0, True, lambda: empirical_dp_check(rr, 1, 0, 1.0, 0.0, trials, 2, seed)),
        ("randomized_response", 1.0, 0.5, False, lambda: empirical_dp_check(rr, 1, 0, 0.5, 0.0, trials, 2, seed)),
        ("noise_free_mean", math.inf, eps, False,
         lambda: empirical_dp_check(noise_free_mean, D.X[:, 0], D2.X[:, 0], eps, 0.0, trials, bins, seed)),
        ("dppsgd_toy", eps, eps, True,
         lambda: empirical_dp_check(dppsgd_first_coordinate(eps), D, D2, eps, 0.0, trials, bins, seed)),
    ]
    rows = []
    summary = _base_summary("audit", cfg)
    summary["cases"] = []
    for name, mech_eps, test_eps, expect, run in cases:
        res = run()
        rows.append([name, _fmt_eps(mech_eps), test_eps, trials, res.n_bins, res.passed, expect,
                     res.passed == expect, res.max_log_ratio, res.worst_excess])
        summary["cases"].append({"case": name, "mechanism_epsilon": mech_eps, "tested_epsilon": test_eps,
                                 "expected_pass": expect, **res.to_dict()})
        log.info("audit %s at eps=%g: passed=%s", name, test_eps, res.passed)
    summary["all_as_expected"] = all(r[7] for r in rows)
    header = ["case", "mechanism_epsilon", "tested_epsilon", "trials", "n_bins", "passed",
              "expected_pass", "as_expected", "max_log_ratio", "worst_excess"]
    return Report("audit", {"audit": (header, rows)}, summary)

import math
import os

import numpy as np
import pytest

from silo_dp.data import GeneratorConfig
from silo_dp.errors import ConfigurationError
from silo_dp.experiments import (
    ExperimentConfig,
    Harness,
    config_from_mapping,
    load_config,
    run_baselines,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    run_generate,
)
from silo_dp.gbdt import GbdtParams

TINY = dict(
    n_splits=2, n_noise_draws=3, partner_counts=(2, 4), n_subsample_repeats=4,
    generator=GeneratorConfig(n_partners=5, size_range=(300, 900)),
    gbdt=GbdtParams(n_rounds=10, max_depth=3),
)


@pytest.fixture(scope="module")
def tiny():
    cfg = ExperimentConfig(**TINY)
    return cfg, Harness(cfg)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.epsilon_grid == (1e-6, 1e-4, 1e-2, 0.1, 0.4) and cfg.include_no_noise
        assert (cfg.epsilon_main, cfg.n_splits, cfg.n_noise_draws, cfg.n_subsample_repeats) == (0.01, 10, 100, 100)
        assert cfg.partner_counts == (5, 10, 15, 20, 25, 30, 35) and cfg.test_fraction == 0.2

    def test_mapping_and_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: 4\nalgorithm: BOTH\ngenerator: {n_partners: 6, label_model: {intercept: 0.0}}\ngbdt: {n_rounds: 3}\n")
        cfg = load_config(path)
        assert cfg.seed == 4 and cfg.algorithms == ("DPPSGD", "AMP")
        assert cfg.generator.n_partners == 6 and cfg.generator.label_model.intercept == 0.0 and cfg.gbdt.n_rounds == 3

    @pytest.mark.parametrize("raw", [
        {"bogus": 1}, {"n_splits": 0}, {"epsilon_grid": [0.1, -1]}, {"algorithm": "SGD"},
        {"partner_counts": [1]}, {"gbdt": {"depth": 3}}, {"target_model": "x"},
    ])
    def test_rejects(self, raw):
        with pytest.raises(ConfigurationError):
            config_from_mapping(raw)

    def test_bad_yaml(self, tmp_path):
        (tmp_path / "bad.yaml").write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "bad.yaml")


class TestRuns:
    def test_baselines(self, tiny):
        cfg, h = tiny
        rep = run_baselines(cfg, h)
        header, rows = rep.tables["baselines"]
        assert len(rows) == 2 * 5 and all(0 <= r[2] <= 1 for r in rows)
        assert rep.summary["cold"]["min"] <= rep.summary["cold"]["max"]

    def test_experiment1_no_noise_row_is_baseline(self, tiny):
        cfg, h = tiny
        base = {r[1]: r[2] for r in run_baselines(cfg, h).tables["baselines"][1] if r[0] == "cold"}
        rep = run_experiment1(cfg, h)
        rows = rep.tables["exp1_per_partner"][1]
        nn = {r[2]: r[3] for r in rows if r[1] == "no-noise"}
        assert nn == base
        assert {r[5] for r in rows if r[1] != "no-noise"} == {cfg.n_splits * cfg.n_noise_draws}
        assert len(rep.tables["exp1_quartiles"][1]) == len(cfg.epsilon_grid) + 1

    def test_experiment2_report(self, tiny):
        cfg, h = tiny
        rep = run_experiment2(cfg, h)
        header, rows = rep.tables["exp2_lifts"]
        assert len(rows) == 5 and "cold_train_size" in header
        sizes = {r[1]: r[2] for r in rows}
        assert sizes == {p.pid: h.cold_baseline(p.pid, 0).train.m for p in h.partners}
        block = rep.summary["algorithms"]["DPPSGD"]
        assert math.isfinite(block["mean_lift_vs_cold"]) and "mean_lift_ramped_variant" in block

    def test_experiment3_report(self, tiny):
        cfg, h = tiny
        rep = run_experiment3(cfg, h)
        rows = rep.tables["exp3_summary"][1]
        assert [r[1] for r in rows] == [2, 4] and all(r[2] == 4 for r in rows)
        with pytest.raises(ConfigurationError):
            run_experiment3(ExperimentConfig(**{**TINY, "partner_counts": (9,)}), h)

    def test_ramped_exclusion_drops_cold_test_rows(self, tiny):
        cfg, h = tiny
        pid = h.partners[0].pid
        h.ramped_on_cold_test(pid, 0)
        fit = h._baselines[("ramped-vs-cold", pid, 0)]
        test_rows = {r.tobytes() for r in fit.test.X}
        assert not any(r.tobytes() in test_rows for r in fit.train.X)
        assert fit.train.m == h.by_id[pid].ramped.m - fit.test.m

    def test_amp_runs(self):
        cfg = ExperimentConfig(**{**TINY, "algorithm": "AMP", "n_splits": 1, "n_noise_draws": 1, "epsilon_grid": (0.1,)})
        h = Harness(cfg)
        rep = run_experiment1(cfg, h)
        assert {r[0] for r in rep.tables["exp1_quartiles"][1]} == {"AMP"}
        assert "AMP" in run_experiment2(cfg, h).summary["algorithms"]

    def test_replay_from_generated_csv(self, tmp_path):
        cfg = ExperimentConfig(**{**TINY, "n_splits": 1})
        run_generate(cfg, tmp_path)
        a = run_baselines(cfg)
        b = run_baselines(ExperimentConfig(**{**TINY, "n_splits": 1, "data_dir": os.path.join(tmp_path, "data")}))
        assert a.tables == b.tables


def test_clone_population_aggregation_lifts():
    """With identical partner distributions and near-noiseless models, the
    other partners' models carry the signal the small cold-start sets lack."""
    cfg = ExperimentConfig(
        n_splits=2, epsilon_main=1e6, ramped_variant=False,
        generator=GeneratorConfig(n_partners=12, size_range=(600, 6000), shift_scale=0.0),
        gbdt=GbdtParams(n_rounds=20, max_depth=2, learning_rate=0.1),
    )
    block = run_experiment2(cfg).summary["algorithms"]["DPPSGD"]
    assert block["mean_lift_vs_cold"] > 0

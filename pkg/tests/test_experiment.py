"""Experiment orchestration: artifacts, determinism, manifest replay."""

import json
import os

import numpy as np
import pytest

import drnlab.experiment as experiment
from drnlab.errors import DrnError, NumericFailureError
from drnlab.experiment import (ARCHS, ExperimentConfig, load_manifest, replay_manifest,
                               run_experiment)
from drnlab.model import load_netlist

from conftest import write_synthetic_dataset


def small_config(dataset_dir, out_dir, *, epochs=1, seed=3, arch="drn-1h"):
    # synthetic 6x6 images keep the input layer small; the published hidden
    # width still applies, which keeps this fast enough for tests
    return ExperimentConfig(
        dataset=str(dataset_dir),
        arch=arch,
        epochs=epochs,
        seed=seed,
        out_dir=str(out_dir),
        a0=10.0,
        lr=(0.01, 0.01),
        t_inference=4,
        batch_size=16,
    )


class TestResolvedConfig:
    def test_defaults_come_from_arch(self):
        cfg = ExperimentConfig("mnist", "drn-2h", 1, 0, "out").resolved()
        spec = ARCHS["drn-2h"]
        assert cfg.beta == spec.beta
        assert cfg.lr == spec.lr
        assert cfg.a0 == spec.a0
        assert cfg.t_inference == spec.iterations == cfg.t_nudge

    def test_overrides_win(self):
        cfg = ExperimentConfig("mnist", "drn-1h", 1, 0, "out", beta=2.5,
                               t_inference=7).resolved()
        assert cfg.beta == 2.5
        assert cfg.t_inference == 7 and cfg.t_nudge == 7

    def test_unknown_arch_rejected(self):
        with pytest.raises(DrnError, match="unknown arch"):
            ExperimentConfig("mnist", "drn-9h", 1, 0, "out").resolved()

    def test_published_hyperparameters(self):
        # the three presets carry the published table values
        assert ARCHS["drn-1h"].a0 == 480.0 and ARCHS["drn-1h"].iterations == 4
        assert ARCHS["drn-1h"].beta == 0.5 and ARCHS["drn-1h"].lr == (0.006, 0.006)
        assert ARCHS["drn-2h"].a0 == 2000.0 and ARCHS["drn-2h"].lr == (0.002, 0.006, 0.005)
        assert ARCHS["drn-3h"].a0 == 4000.0 and ARCHS["drn-3h"].lr == (0.005, 0.02, 0.08, 0.005)


class TestRunExperiment:
    def test_untrained_net_is_chance_level(self, tmp_path):
        dataset = write_synthetic_dataset(tmp_path / "ds", n_train=40, n_test=200,
                                          seed=5, learnable=False)
        cfg = small_config(dataset, tmp_path / "out", epochs=0)
        metrics = run_experiment(cfg)
        assert len(metrics.rows) == 1
        assert 0.75 <= metrics.rows[0]["test_err"] <= 0.99

    def test_artifacts_written(self, tmp_path, synthetic_dataset):
        cfg = small_config(synthetic_dataset, tmp_path / "out", epochs=1)
        metrics = run_experiment(cfg)
        out = tmp_path / "out"
        for name in ("manifest.json", "metrics.csv", "checkpoint.netlist", "stats.csv"):
            assert (out / name).exists(), name
        text = (out / "metrics.csv").read_text().splitlines()
        assert text[0] == "# drn-lab metrics v1"
        assert text[1] == "epoch,train_err,test_err,mean_energy,lr"
        assert len(text) == 3
        checkpoint = load_netlist(out / "checkpoint.netlist")
        assert checkpoint.widths[0] == 2 * 36 + 2
        assert len(metrics.conductance_stats) == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == cfg.seed
        assert len(manifest["dataset_files"]) == 4

    def test_same_seed_bitwise_metrics(self, tmp_path, synthetic_dataset):
        a = small_config(synthetic_dataset, tmp_path / "a", epochs=2)
        b = small_config(synthetic_dataset, tmp_path / "b", epochs=2)
        run_experiment(a)
        run_experiment(b)
        assert (tmp_path / "a" / "metrics.csv").read_bytes() == \
            (tmp_path / "b" / "metrics.csv").read_bytes()

    def test_manifest_replay_reproduces_bitwise(self, tmp_path, synthetic_dataset):
        cfg = small_config(synthetic_dataset, tmp_path / "orig", epochs=2)
        run_experiment(cfg)
        replay_manifest(tmp_path / "orig" / "manifest.json", tmp_path / "replay")
        assert (tmp_path / "orig" / "metrics.csv").read_bytes() == \
            (tmp_path / "replay" / "metrics.csv").read_bytes()
        assert (tmp_path / "orig" / "checkpoint.netlist").read_bytes() == \
            (tmp_path / "replay" / "checkpoint.netlist").read_bytes()

    def test_load_manifest_roundtrip(self, tmp_path, synthetic_dataset):
        cfg = small_config(synthetic_dataset, tmp_path / "out", epochs=1)
        run_experiment(cfg)
        loaded = load_manifest(tmp_path / "out" / "manifest.json")
        assert loaded.resolved() == cfg.resolved()

    def test_failure_writes_marker(self, tmp_path, synthetic_dataset, monkeypatch):
        cfg = small_config(synthetic_dataset, tmp_path / "out", epochs=1)

        def boom(*args, **kwargs):
            raise NumericFailureError("synthetic blow-up", batch_index=0)

        monkeypatch.setattr(experiment, "train_epoch", boom)
        with pytest.raises(NumericFailureError):
            run_experiment(cfg)
        marker = tmp_path / "out" / "FAILED"
        assert marker.exists()
        assert "synthetic blow-up" in marker.read_text()
        assert (tmp_path / "out" / "metrics.csv").exists()

    def test_training_reduces_error_on_learnable_data(self, tmp_path, synthetic_dataset):
        cfg = small_config(synthetic_dataset, tmp_path / "out", epochs=3)
        metrics = run_experiment(cfg)
        # blobs are nearly separable; three epochs should beat chance soundly
        assert metrics.test_error < 0.5
        errs = [row["test_err"] for row in metrics.rows]
        assert errs[-1] <= errs[0] + 1e-12

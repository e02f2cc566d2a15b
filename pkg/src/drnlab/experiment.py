"""Experiment orchestration: datasets in, trained checkpoints and CSVs out.

A run is fully described by its manifest (architecture, hyperparameters,
seed, dataset identity); replaying a manifest reproduces the metrics file
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .data import IdxDataset, load_split, resolve_dataset_dir
from .ep import EpConfig, OptimizerState, conductance_stats, evaluate, train_epoch
from .errors import DimensionError, DrnError
from .model import random_drn, save_netlist
from .solver import SolverConfig, solve_steady_state

METRICS_HEADER = "# drn-lab metrics v1"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ArchSpec:
    """Network geometry plus the published training hyperparameters."""

    hidden: tuple[int, ...]
    a0: float
    iterations: int
    beta: float
    lr: tuple[float, ...]


# 28x28 inputs map to 2*784 paired input units (+ bias pair); hidden entries
# count unit pairs, so e.g. 512 pairs = 1024 hidden circuit units.
ARCHS = {
    "drn-1h": ArchSpec((512,), 480.0, 4, 0.5, (0.006, 0.006)),
    "drn-2h": ArchSpec((512, 512), 2000.0, 5, 1.0, (0.002, 0.006, 0.005)),
    "drn-3h": ArchSpec((512, 512, 512), 4000.0, 6, 2.0, (0.005, 0.02, 0.08, 0.005)),
}


@dataclass
class ExperimentConfig:
    dataset: str
    arch: str
    epochs: int
    seed: int
    out_dir: str
    data_dir: str | None = None
    # None means: take the architecture's published default
    beta: float | None = None
    lr: tuple[float, ...] | None = None
    a0: float | None = None
    t_inference: int | None = None
    t_nudge: int | None = None
    momentum: float = 0.9
    lr_decay: float = 0.99
    batch_size: int = 32

    def resolved(self) -> "ExperimentConfig":
        if self.arch not in ARCHS:
            raise DimensionError(f"unknown arch {self.arch!r}; choose from {sorted(ARCHS)}")
        spec = ARCHS[self.arch]
        t = self.t_inference if self.t_inference is not None else spec.iterations
        return ExperimentConfig(
            dataset=self.dataset,
            arch=self.arch,
            epochs=self.epochs,
            seed=self.seed,
            out_dir=self.out_dir,
            data_dir=self.data_dir,
            beta=self.beta if self.beta is not None else spec.beta,
            lr=tuple(self.lr) if self.lr is not None else spec.lr,
            a0=self.a0 if self.a0 is not None else spec.a0,
            t_inference=t,
            t_nudge=self.t_nudge if self.t_nudge is not None else t,
            momentum=self.momentum,
            lr_decay=self.lr_decay,
            batch_size=self.batch_size,
        )

    def ep_config(self) -> EpConfig:
        cfg = self.resolved()
        return EpConfig(
            beta=cfg.beta,
            lr=cfg.lr,
            momentum=cfg.momentum,
            lr_decay=cfg.lr_decay,
            batch_size=cfg.batch_size,
            epochs=cfg.epochs,
            t_inference=cfg.t_inference,
            t_nudge=cfg.t_nudge,
        )


@dataclass
class RunMetrics:
    """One row per evaluated epoch plus end-of-run summaries."""

    rows: list[dict] = field(default_factory=list)
    conductance_stats: list = field(default_factory=list)
    test_error: float = float("nan")

    def append(self, epoch, train_err, test_err, mean_energy, lr):
        self.rows.append({
            "epoch": epoch,
            "train_err": train_err,
            "test_err": test_err,
            "mean_energy": mean_energy,
            "lr": lr,
        })
        self.test_error = test_err


def _metrics_lines(metrics: RunMetrics) -> list[str]:
    lines = [METRICS_HEADER, "epoch,train_err,test_err,mean_energy,lr"]
    for row in metrics.rows:
        lines.append(",".join([
            str(row["epoch"]), repr(row["train_err"]), repr(row["test_err"]),
            repr(row["mean_energy"]), repr(row["lr"]),
        ]))
    return lines


def _write_metrics(path, metrics: RunMetrics):
    with open(path, "w") as f:
        f.write("\n".join(_metrics_lines(metrics)) + "\n")


def _file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(cfg: ExperimentConfig, dataset_dir, path):
    cfg = cfg.resolved()
    payload = {
        "manifest_version": MANIFEST_VERSION,
        "code_version": __version__,
        "config": asdict(cfg),
        "dataset_dir": dataset_dir,
        "dataset_files": {
            name: _file_sha256(os.path.join(dataset_dir, name))
            for name in sorted(os.listdir(dataset_dir))
            if "ubyte" in name
        },
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> ExperimentConfig:
    with open(path) as f:
        payload = json.load(f)
    if payload.get("manifest_version") != MANIFEST_VERSION:
        raise DimensionError(f"unsupported manifest version in {path}")
    cfg = payload["config"]
    cfg["lr"] = tuple(cfg["lr"]) if cfg["lr"] is not None else None
    return ExperimentConfig(**cfg)


def _write_stats(path, stats):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["layer", "mean", "std", "max"])
        for s in stats:
            writer.writerow([s.layer, repr(s.mean), repr(s.std), repr(s.max)])


def run_experiment(cfg: ExperimentConfig, *, out_dir=None) -> RunMetrics:
    """Train (or just evaluate, when epochs=0) per the config and write all
    artifacts: manifest.json, metrics.csv, checkpoint.netlist, stats.csv.

    On failure the partial metrics are flushed next to a FAILED marker file
    naming the error, then the exception propagates.
    """
    cfg = cfg.resolved()
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    dataset_dir = resolve_dataset_dir(cfg.dataset, cfg.data_dir)
    train = load_split(dataset_dir, "train")
    test = load_split(dataset_dir, "test")

    q = train.images.shape[1]
    dims = (q,) + ARCHS[cfg.arch].hidden + (10,)
    params = random_drn(dims, cfg.seed, a0=cfg.a0, leaks_enabled=False)
    ep_cfg = cfg.ep_config()
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 1]))

    write_manifest(cfg, dataset_dir, os.path.join(out, "manifest.json"))
    metrics = RunMetrics()
    metrics_path = os.path.join(out, "metrics.csv")
    opt = None
    try:
        if cfg.epochs == 0:
            train_err = evaluate(params, train.images, train.labels, ep_cfg)
            test_err = evaluate(params, test.images, test.labels, ep_cfg)
            metrics.append(0, train_err, test_err, float("nan"), ep_cfg.lr[0])
            _write_metrics(metrics_path, metrics)
        for epoch in range(1, cfg.epochs + 1):
            params, em, opt = train_epoch(params, train.images, train.labels,
                                          ep_cfg, shuffle_rng, opt)
            test_err = evaluate(params, test.images, test.labels, ep_cfg)
            metrics.append(epoch, em.train_error, test_err, em.mean_energy, em.lr[0])
            _write_metrics(metrics_path, metrics)
    except DrnError as exc:
        _write_metrics(metrics_path, metrics)
        with open(os.path.join(out, "FAILED"), "w") as f:
            f.write(f"{type(exc).__name__}: {exc}\n")
        raise

    metrics.conductance_stats = conductance_stats(params)
    _write_stats(os.path.join(out, "stats.csv"), metrics.conductance_stats)
    save_netlist(params, os.path.join(out, "checkpoint.netlist"))
    return metrics


def replay_manifest(manifest_path, out_dir) -> RunMetrics:
    """Re-run an experiment exactly as recorded in its manifest."""
    cfg = load_manifest(manifest_path)
    return run_experiment(cfg, out_dir=out_dir)

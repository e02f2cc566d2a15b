"""Equilibrium Propagation training.

Two-phase contrastive learning: relax the circuit to its free steady state,
then re-relax with the outputs softly pulled toward the targets through a
nudge conductance beta, and estimate each conductance's cost gradient from
the squared branch-voltage change between the two states. Updates are SGD
with momentum, an exponential per-epoch learning-rate decay, and a clip to
non-negative conductances after every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericFailureError
from .model import DrnParams, DrnState, encode_input, with_couplings
from .solver import SolveResult, SolverConfig, energy, solve_steady_state


@dataclass(frozen=True)
class EpConfig:
    """Training hyperparameters.

    lr holds one learning rate per coupling matrix (depth order); the same
    rate covers that layer's bias rows. lr_decay multiplies every rate after
    each epoch.
    """

    beta: float = 0.5
    lr: tuple[float, ...] = (0.006, 0.006)
    momentum: float = 0.9
    lr_decay: float = 0.99
    batch_size: int = 32
    epochs: int = 10
    t_inference: int = 4
    t_nudge: int = 4

    def __post_init__(self):
        if self.beta <= 0:
            raise DimensionError("nudging parameter beta must be positive")
        if any(eta < 0 for eta in self.lr):
            raise DimensionError("learning rates must be non-negative")
        if not 0 <= self.momentum < 1:
            raise DimensionError("momentum must lie in [0, 1)")
        if not 0 < self.lr_decay <= 1:
            raise DimensionError("lr_decay must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 0:
            raise DimensionError("batch_size must be >= 1 and epochs >= 0")
        if self.t_inference < 1 or self.t_nudge < 1:
            raise DimensionError("iteration counts must be >= 1")


def one_hot_targets(labels, num_outputs: int) -> np.ndarray:
    """Desired output potentials: 1 at the class node, 0 elsewhere."""
    labels = np.asarray(labels)
    return np.eye(num_outputs)[labels]


def nudged_energy(params: DrnParams, state: DrnState, targets, beta: float) -> np.ndarray:
    """energy + beta * sum_k (v_out_k - y_k)^2, per batch row."""
    return energy(params, state, beta=beta, targets=targets)


def nudged_solve(params: DrnParams, inputs, targets, beta: float,
                 config: SolverConfig, init: DrnState | None = None) -> SolveResult:
    """Steady state of the nudged energy, warm-started from the free state.

    Identical layer updates except at the output, whose quotient gains
    beta*y_k in the numerator and beta in the denominator.
    """
    return solve_steady_state(params, inputs, config, beta=beta, targets=targets, init=init)


@dataclass
class EpGradients:
    couplings: list[np.ndarray]
    leaks: list[np.ndarray]


def ep_gradient(params: DrnParams, free_state: DrnState, nudge_state: DrnState,
                beta: float) -> EpGradients:
    """Contrastive gradient estimates, batch-averaged.

    For the resistor between node j (layer l) and node k (layer l+1):
        (1/beta) * [ (v_j - v_k)^2 at nudge  -  (v_j - v_k)^2 at free ]
    and analogously for leaks with the ground node at 0. Columns wiring into
    bias nodes are structural zeros and get zero estimates.
    """
    if beta <= 0:
        raise DimensionError("ep_gradient needs beta > 0")
    b = free_state.batch_size
    inv = 1.0 / (beta * b)
    grads = EpGradients([], [])
    for l in range(params.num_layers):
        p0, c0 = free_state.potentials[l], free_state.potentials[l + 1]
        p1, c1 = nudge_state.potentials[l], nudge_state.potentials[l + 1]
        rowsq = (p1 * p1 - p0 * p0).sum(axis=0)
        colsq = (c1 * c1 - c0 * c0).sum(axis=0)
        cross = p1.T @ c1 - p0.T @ c0
        g = inv * (rowsq[:, None] + colsq[None, :] - 2.0 * cross)
        if l + 1 < params.num_layers:
            g[:, :2] = 0.0
        grads.couplings.append(g)
        grads.leaks.append(inv * colsq)
    return grads


@dataclass
class OptimizerState:
    """Momentum buffers and the current (decayed) learning rates."""

    velocity_couplings: list[np.ndarray]
    velocity_leaks: list[np.ndarray]
    lr: list[float]

    @classmethod
    def fresh(cls, params: DrnParams, cfg: EpConfig) -> "OptimizerState":
        if len(cfg.lr) != params.num_layers:
            raise DimensionError(
                f"need {params.num_layers} learning rates, got {len(cfg.lr)}")
        return cls(
            [np.zeros_like(g) for g in params.couplings],
            [np.zeros_like(v) for v in params.leaks],
            list(cfg.lr),
        )


def apply_update(params: DrnParams, grads: EpGradients, opt: OptimizerState,
                 momentum: float) -> DrnParams:
    """One momentum SGD step followed by the non-negativity clip."""
    new_couplings = []
    new_leaks = []
    for l in range(params.num_layers):
        opt.velocity_couplings[l] = momentum * opt.velocity_couplings[l] + grads.couplings[l]
        g = np.maximum(0.0, params.couplings[l] - opt.lr[l] * opt.velocity_couplings[l])
        if l + 1 < params.num_layers:
            g[:, :2] = 0.0
        new_couplings.append(g)
        if params.leaks_enabled:
            opt.velocity_leaks[l] = momentum * opt.velocity_leaks[l] + grads.leaks[l]
            new_leaks.append(np.maximum(0.0, params.leaks[l] - opt.lr[l] * opt.velocity_leaks[l]))
        else:
            new_leaks.append(params.leaks[l])
    return with_couplings(params, new_couplings, new_leaks)


@dataclass
class EpochMetrics:
    train_error: float
    mean_energy: float
    batches: int
    examples: int
    lr: tuple[float, ...]
    descent_margin: float = -np.inf


def train_epoch(params: DrnParams, images, labels, cfg: EpConfig, rng,
                opt: OptimizerState | None = None, *,
                track_descent: bool = False) -> tuple[DrnParams, EpochMetrics, OptimizerState]:
    """One pass over the training set.

    Per minibatch: free solve (t_inference sweeps, recording the argmax
    classification error), nudged solve (t_nudge sweeps, warm-started),
    contrastive gradient, momentum update, clip to non-negative. After the
    pass every learning rate is multiplied by lr_decay. Deterministic for a
    given rng state and data order.
    """
    if opt is None:
        opt = OptimizerState.fresh(params, cfg)
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = images.shape[0]
    order = rng.permutation(n)
    num_outputs = params.widths[-1]
    free_cfg = SolverConfig(num_iterations=cfg.t_inference, certify=False,
                            track_descent=track_descent)
    nudge_cfg = SolverConfig(num_iterations=cfg.t_nudge, certify=False,
                             track_descent=track_descent)

    errors = 0
    energy_total = 0.0
    batches = 0
    worst_margin = -np.inf
    for start in range(0, n, cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        x = encode_input(images[idx], params.gains[0])
        y = one_hot_targets(labels[idx], num_outputs)
        try:
            free = solve_steady_state(params, x, free_cfg)
            nudge = nudged_solve(params, x, y, cfg.beta, nudge_cfg, init=free.state)
        except NumericFailureError as exc:
            raise NumericFailureError(
                f"batch {batches} (examples {start}..{start + len(idx) - 1}): {exc}",
                batch_index=batches) from exc
        errors += int((free.state.output.argmax(axis=1) != labels[idx]).sum())
        energy_total += float(energy(params, free.state).mean())
        if track_descent:
            worst_margin = max(worst_margin, max(free.descent_margins),
                               max(nudge.descent_margins))
        grads = ep_gradient(params, free.state, nudge.state, cfg.beta)
        params = apply_update(params, grads, opt, cfg.momentum)
        batches += 1

    metrics = EpochMetrics(
        train_error=errors / n if n else 0.0,
        mean_energy=energy_total / batches if batches else 0.0,
        batches=batches,
        examples=n,
        lr=tuple(opt.lr),
        descent_margin=worst_margin,
    )
    opt.lr = [eta * cfg.lr_decay for eta in opt.lr]
    return params, metrics, opt


def evaluate(params: DrnParams, images, labels, cfg: EpConfig, *,
             eval_batch: int = 512) -> float:
    """Classification error rate of the free steady state's argmax readout."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    solver = SolverConfig(num_iterations=cfg.t_inference, certify=False)
    errors = 0
    for start in range(0, images.shape[0], eval_batch):
        x = encode_input(images[start:start + eval_batch], params.gains[0])
        out = solve_steady_state(params, x, solver).state.output
        errors += int((out.argmax(axis=1) != labels[start:start + eval_batch]).sum())
    return errors / images.shape[0]


@dataclass
class LayerStats:
    layer: int
    mean: float
    std: float
    max: float


def conductance_stats(params: DrnParams) -> list[LayerStats]:
    """Per-coupling-matrix mean, population std, and max (report style of the
    trained-conductance tables)."""
    stats = []
    for l, g in enumerate(params.couplings, start=1):
        stats.append(LayerStats(l, float(g.mean()), float(g.std()), float(g.max())))
    return stats

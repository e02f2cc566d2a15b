"""Steady-state computation by exact block coordinate descent.

One iteration sweeps the layers from inputs to output, replacing each layer's
free potentials with the exact minimizer of the network energy over that
layer (a clipped quotient of neighbor signals by total conductance). Inputs
and bias nodes stay pinned. The energy never increases, so the iteration
relaxes to the circuit's DC operating point.

Besides the solver itself this module hosts the certification tools: the
dissipated-power energy, per-node Kirchhoff/diode-complementarity residuals,
and the layerwise maximum-principle check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericFailureError
from .model import BIDIRECTIONAL, DrnParams, DrnState


@dataclass(frozen=True)
class SolverConfig:
    """num_iterations is a hard cap; convergence_tol, when set, stops the
    sweep early once the largest potential change in a full iteration drops
    below it."""

    num_iterations: int = 100
    convergence_tol: float | None = None
    certify: bool = True
    track_descent: bool = False

    def __post_init__(self):
        if self.num_iterations < 1:
            raise DimensionError("need at least one iteration")
        if self.convergence_tol is not None and self.convergence_tol < 0:
            raise DimensionError("convergence_tol must be non-negative")


@dataclass
class SteadyStateCert:
    """Certificate attached to a solve: worst normalized KCL/complementarity
    residual (volts), whether all diode constraints hold, and the per-row
    energy at the returned state (watts)."""

    kcl_residual_max: float
    diode_feasible: bool
    energy_value: np.ndarray


@dataclass
class SolveResult:
    state: DrnState
    iterations: int
    last_delta: float
    cert: SteadyStateCert | None = None
    descent_margins: list[float] | None = None


def _numerator(params: DrnParams, v: list[np.ndarray], l: int,
               beta: float = 0.0, targets=None) -> np.ndarray:
    """Conductance-weighted neighbor signal arriving at layer l's nodes."""
    L = params.num_layers
    num = v[l - 1] @ params.couplings[l - 1]
    if params.amplifier_mode == BIDIRECTIONAL:
        num *= params.amp_gains[l - 1]
    if l < L:
        back = v[l + 1] @ params.couplings[l].T
        if params.amplifier_mode == BIDIRECTIONAL:
            back = back / params.amp_gains[l]
        num += back
    elif beta:
        num += beta * targets
    return num


def _denominator(params: DrnParams, l: int, beta: float = 0.0) -> np.ndarray:
    d = params.total_conductance(l)
    if beta and l == params.num_layers:
        d = d + beta
    return d


def layer_update(params: DrnParams, state: DrnState, l: int, *,
                 beta: float = 0.0, targets=None) -> np.ndarray:
    """One simultaneous update of layer l's free units; returns the new
    potentials without mutating the state.

    Hidden units take the clipped quotient (max for excitatory, min for
    inhibitory); output units take the plain quotient, with the nudge term
    beta*(targets) folded into numerator and denominator when beta > 0.
    Bias nodes are untouched.
    """
    if not 1 <= l <= params.num_layers:
        raise DimensionError(f"layer index {l} out of range 1..{params.num_layers}")
    v = state.potentials
    num = _numerator(params, v, l, beta, targets)
    den = _denominator(params, l, beta)
    if l == params.num_layers:
        return num / den
    out = v[l].copy()
    p = num[:, 2:] / den[2:]
    out[:, 2::2] = np.maximum(0.0, p[:, 0::2])
    out[:, 3::2] = np.minimum(0.0, p[:, 1::2])
    return out


def amplified_layer_update(params: DrnParams, state: DrnState, l: int, *,
                           beta: float = 0.0, targets=None) -> np.ndarray:
    """Layer update for networks whose units sit behind bidirectional
    amplifiers: forward signals are scaled by the layer gain, backward
    signals by the inverse of the next layer's gain."""
    if params.amplifier_mode != BIDIRECTIONAL:
        raise DimensionError("params are not in bidirectional-amplifier mode")
    return layer_update(params, state, l, beta=beta, targets=targets)


def _descent_margin(params, v_old, v_new, num, den, l) -> float:
    """Upper bound on the energy change produced by one block update.

    Restricted to one layer the energy is sum_k D_k v_k^2 - 2 num_k v_k up
    to a constant, so the exact change is D*(v+ - v-)*(v+ + v- - 2 num/D).
    Every factor's sign is fixed by the clipping rule, so the float value is
    non-positive up to ~1e-25 slack; a positive value of any size signals a
    genuine ascent step.
    """
    if l == params.num_layers:
        d = den
        delta = v_new - v_old
        terms = d * delta * (v_new + v_old - 2.0 * num / d)
    else:
        d = den[2:]
        delta = v_new[:, 2:] - v_old[:, 2:]
        terms = d * delta * (v_new[:, 2:] + v_old[:, 2:] - 2.0 * num[:, 2:] / d)
    return float(terms.max(initial=-np.inf))


def initial_state(params: DrnParams, inputs) -> DrnState:
    """State with pinned inputs and bias pairs, all free potentials at zero."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    widths = params.widths
    if inputs.ndim != 2 or inputs.shape[1] != widths[0]:
        raise DimensionError(f"inputs have shape {inputs.shape}, expected (*, {widths[0]})")
    b = inputs.shape[0]
    v = [inputs.copy()]
    for l in range(1, params.num_layers + 1):
        layer = np.zeros((b, widths[l]))
        if l < params.num_layers:
            layer[:, 0] = params.gains[l]
            layer[:, 1] = -params.gains[l]
        v.append(layer)
    return DrnState(v)


def solve_steady_state(params: DrnParams, inputs, config: SolverConfig = SolverConfig(), *,
                       beta: float = 0.0, targets=None, init: DrnState | None = None) -> SolveResult:
    """Relax the network to steady state for a batch of pinned inputs.

    inputs holds full input-layer potentials (use encode_input to build them
    from raw values). Free potentials start at zero unless a warm-start state
    is given. When beta > 0 the output layer is nudged toward `targets`
    (batch, outputs), i.e. the minimized energy gains beta * sum (v - y)^2.
    """
    if beta < 0:
        raise DimensionError("beta must be non-negative")
    if beta:
        targets = np.asarray(targets, dtype=np.float64)
    state = init.copy() if init is not None else initial_state(params, inputs)
    if beta and targets.shape != state.potentials[-1].shape:
        raise DimensionError(
            f"targets have shape {targets.shape}, expected {state.potentials[-1].shape}")
    L = params.num_layers
    v = state.potentials
    dens = [None] + [_denominator(params, l, beta) for l in range(1, L + 1)]

    margins = [] if config.track_descent else None
    delta = np.inf
    iterations = 0
    for _ in range(config.num_iterations):
        delta = 0.0
        for l in range(1, L + 1):
            num = _numerator(params, v, l, beta, targets)
            if l == L:
                new = num / dens[l]
            else:
                new = v[l].copy()
                p = num[:, 2:] / dens[l][2:]
                new[:, 2::2] = np.maximum(0.0, p[:, 0::2])
                new[:, 3::2] = np.minimum(0.0, p[:, 1::2])
            if margins is not None:
                margins.append(_descent_margin(params, v[l], new, num, dens[l], l))
            delta = max(delta, float(np.abs(new - v[l]).max(initial=0.0)))
            v[l] = new
        iterations += 1
        if config.convergence_tol is not None and delta < config.convergence_tol:
            break

    for l in range(1, L + 1):
        bad = ~np.isfinite(v[l])
        if bad.any():
            row = int(np.nonzero(bad.any(axis=1))[0][0])
            raise NumericFailureError(
                f"non-finite potentials in layer {l} (batch row {row})", batch_index=row)

    cert = None
    if config.certify:
        cert = certificate(params, state, beta=beta, targets=targets)
    return SolveResult(state, iterations, delta, cert, margins)


def energy(params: DrnParams, state: DrnState, *, beta: float = 0.0, targets=None) -> np.ndarray:
    """Dissipated power per batch row: sum of g*(dv)^2 over all coupling
    resistors plus leak terms g_k*v_k^2, plus the nudge branch beta*(v-y)^2
    when beta > 0. Non-negative by construction."""
    v = state.potentials
    total = np.zeros(state.batch_size)
    for l in range(1, params.num_layers + 1):
        g = params.couplings[l - 1]
        prev, cur = v[l - 1], v[l]
        total += (prev * prev) @ g.sum(axis=1)
        total += (cur * cur) @ g.sum(axis=0)
        total -= 2.0 * np.einsum("bj,bj->b", prev, cur @ g.T)
        total += (cur * cur) @ params.leaks[l - 1]
    if beta:
        diff = v[-1] - np.asarray(targets, dtype=np.float64)
        total += beta * (diff * diff).sum(axis=1)
    return total


def kcl_residual(params: DrnParams, state: DrnState, *, beta: float = 0.0, targets=None):
    """Per-node steady-state residuals and inferred diode currents.

    For every free node the net resistive current S = numerator - D*v is
    computed; a hidden node's diode must absorb it (i = -S), and the ideal
    characteristic demands v and i non-negative for excitatory units (both
    non-positive for inhibitory ones) with v*i = 0. Output nodes have no
    diode, so S itself must vanish. Residuals are normalized by the node's
    total conductance D (volts). Returns (residuals, diode_currents), lists
    indexed by layer 1..L with shape (batch, width); bias-node entries are
    zero. Reports, never raises.
    """
    v = state.potentials
    L = params.num_layers
    residuals = []
    currents = []
    for l in range(1, L + 1):
        num = _numerator(params, v, l, beta, targets)
        den = _denominator(params, l, beta)
        s = num - den * v[l]
        r = np.zeros_like(s)
        i = np.zeros_like(s)
        if l == L:
            r[:] = np.abs(s) / den
        else:
            i[:, 2:] = -s[:, 2:]
            vk = v[l][:, 2:]
            ik = i[:, 2:] / den[2:]
            sign = np.where(np.arange(2, params.widths[l]) % 2 == 0, 1.0, -1.0)
            polarity_viol = np.maximum(0.0, -sign * vk)
            current_viol = np.maximum(0.0, -sign * ik)
            slackness = np.minimum(np.abs(vk), np.abs(ik))
            r[:, 2:] = np.maximum(np.maximum(polarity_viol, current_viol), slackness)
        residuals.append(r)
        currents.append(i)
    return residuals, currents


def certificate(params: DrnParams, state: DrnState, *, beta: float = 0.0, targets=None,
                tol: float = 1e-8) -> SteadyStateCert:
    residuals, currents = kcl_residual(params, state, beta=beta, targets=targets)
    worst = max(float(r.max(initial=0.0)) for r in residuals)
    feasible = True
    sign_layers = params.polarities()
    for l in range(1, params.num_layers):
        sign = np.where([p == "exc" for p in sign_layers[l][2:]], 1.0, -1.0)
        vk = state.potentials[l][:, 2:]
        ik = currents[l - 1][:, 2:]
        if (sign * vk < 0).any() or ((-sign * ik) / _denominator(params, l)[2:] > tol).any():
            feasible = False
    return SteadyStateCert(worst, feasible, energy(params, state, beta=beta, targets=targets))


def max_principle_check(params: DrnParams, state: DrnState, *, slack: float = 1e-9):
    """Layerwise maximum-amplitude bound at steady state.

    Checks |v| on each layer's signal nodes against the largest of the
    previous layer's amplitude and the remaining bias gains; also checks the
    global bound (input amplitude vs all gains). Returns (passed, v_max) with
    v_max a list over layers 0..L.
    """
    v = state.potentials
    L = params.num_layers
    vmax = []
    for l in range(L + 1):
        sig = v[l] if l == L else v[l][:, 2:]
        vmax.append(float(np.abs(sig).max(initial=0.0)))
    gains = params.gains
    passed = True
    for l in range(1, L + 1):
        bound = max([vmax[l - 1]] + [gains[m] for m in range(l - 1, L)])
        if vmax[l] > bound * (1.0 + 1e-12) + slack:
            passed = False
    global_bound = max([vmax[0]] + [abs(a) for a in gains])
    if max(vmax[1:], default=0.0) > global_bound * (1.0 + 1e-12) + slack:
        passed = False
    return passed, vmax

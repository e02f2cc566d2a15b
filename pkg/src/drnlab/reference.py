"""Independent oracles used to certify the fast solver and the EP estimator.

The steady state of an ideal network minimizes dissipated power over the
diode-feasible orthant. `minimize_energy` performs that minimization
directly - projected gradient descent with diminishing steps on the
quadratic form assembled from the conductances - without reusing any of the
solver's update machinery. `fd_cost_gradients` differentiates the cost of
the solved steady state through centered finite differences in each
conductance.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .model import DrnParams, DrnState, EXCITATORY, INHIBITORY, with_couplings
from .solver import SolverConfig, solve_steady_state


def free_node_index(params: DrnParams):
    """Enumerate the free (non-pinned) nodes as (layer, node) pairs."""
    widths = params.widths
    nodes = []
    for l in range(1, params.num_layers + 1):
        start = 0 if l == params.num_layers else 2
        nodes.extend((l, k) for k in range(start, widths[l]))
    return nodes


def assemble_quadratic(params: DrnParams, inputs_row, *, beta: float = 0.0, targets_row=None):
    """Energy restricted to the free nodes, as E(z) = z'Az - 2 b'z + const.

    A's diagonal holds each node's total conductance (plus beta on nudged
    outputs), off-diagonals the negated couplings between free nodes; b
    collects conductance-weighted pinned potentials (inputs, bias pairs, and
    beta-weighted targets). Returns (nodes, A, b).
    """
    nodes = free_node_index(params)
    pos = {nk: i for i, nk in enumerate(nodes)}
    n = len(nodes)
    a = np.zeros((n, n))
    b = np.zeros(n)
    L = params.num_layers
    widths = params.widths
    gains = params.gains
    inputs_row = np.asarray(inputs_row, dtype=np.float64)
    if inputs_row.shape != (widths[0],):
        raise DimensionError(f"need one input row of width {widths[0]}")

    pinned = {(0, j): inputs_row[j] for j in range(widths[0])}
    for l in range(1, L):
        pinned[(l, 0)] = gains[l]
        pinned[(l, 1)] = -gains[l]

    for i, (l, k) in enumerate(nodes):
        a[i, i] = params.total_conductance(l)[k]
        if beta and l == L:
            a[i, i] += beta
            b[i] += beta * targets_row[k]
        g_in = params.couplings[l - 1]
        for j in range(widths[l - 1]):
            g = g_in[j, k]
            if g == 0.0:
                continue
            if (l - 1, j) in pinned:
                b[i] += g * pinned[(l - 1, j)]
            else:
                a[i, pos[(l - 1, j)]] -= g
        if l < L:
            g_out = params.couplings[l]
            for j in range(2 if l + 1 < L else 0, widths[l + 1]):
                g = g_out[k, j]
                if g:
                    a[i, pos[(l + 1, j)]] -= g
    return nodes, a, b


def minimize_energy(params: DrnParams, inputs_row, *, beta: float = 0.0, targets_row=None,
                    iterations: int = 60000, step_tau: float = 2000.0,
                    tol: float = 1e-14) -> DrnState:
    """Projected gradient descent with diminishing steps on the network energy.

    Steps are alpha_t = alpha_0 / (1 + t/step_tau) with alpha_0 = 1/(2 max
    total conductance), always inside the stable range; each iterate is
    clamped back onto the diode orthant (excitatory >= 0, inhibitory <= 0,
    outputs free). Returns the minimizer as a batch-of-one state.
    """
    nodes, a, b = assemble_quadratic(params, inputs_row, beta=beta, targets_row=targets_row)
    layout = params.polarities()
    lo = np.full(len(nodes), -np.inf)
    hi = np.full(len(nodes), np.inf)
    for i, (l, k) in enumerate(nodes):
        if layout[l][k] == EXCITATORY:
            lo[i] = 0.0
        elif layout[l][k] == INHIBITORY:
            hi[i] = 0.0

    alpha0 = 1.0 / (2.0 * a.diagonal().max())
    z = np.zeros(len(nodes))
    for t in range(iterations):
        grad = 2.0 * (a @ z - b)
        step = alpha0 / (1.0 + t / step_tau)
        z_next = np.clip(z - step * grad, lo, hi)
        if np.abs(z_next - z).max(initial=0.0) < tol:
            z = z_next
            break
        z = z_next

    widths = params.widths
    v = [np.asarray(inputs_row, dtype=np.float64)[None, :].copy()]
    for l in range(1, params.num_layers + 1):
        layer = np.zeros((1, widths[l]))
        if l < params.num_layers:
            layer[0, 0] = params.gains[l]
            layer[0, 1] = -params.gains[l]
        v.append(layer)
    for i, (l, k) in enumerate(nodes):
        v[l][0, k] = z[i]
    return DrnState(v)


def cost_at_steady_state(params: DrnParams, inputs, targets, config: SolverConfig,
                         init=None) -> float:
    """Batch-mean squared output error of the free steady state."""
    result = solve_steady_state(params, inputs, config, init=init)
    diff = result.state.output - np.asarray(targets, dtype=np.float64)
    return float(((diff * diff).sum(axis=1)).mean())


def fd_cost_gradients(params: DrnParams, inputs, targets, *, h: float = 1e-6,
                      config: SolverConfig | None = None):
    """Centered finite differences of the steady-state cost in every
    conductance: (C(g+h) - C(g-h)) / 2h.

    Conductances touched by the perturbation must stay positive (g >= h),
    otherwise g-h would be an invalid resistor. Each perturbed solve warm
    starts from the unperturbed steady state. Returns (coupling_grads,
    leak_grads) matching the params' shapes; leak gradients are computed
    only when the model has leaks enabled (zeros otherwise).
    """
    if config is None:
        config = SolverConfig(num_iterations=20000, convergence_tol=1e-14, certify=False)
    base = solve_steady_state(params, inputs, config)
    warm = base.state

    def perturbed(l, j, k, is_leak, delta):
        couplings = [g.copy() for g in params.couplings]
        leaks = [v.copy() for v in params.leaks]
        if is_leak:
            leaks[l][k] += delta
        else:
            couplings[l][j, k] += delta
        return with_couplings(params, couplings, leaks)

    def cost(p):
        return cost_at_steady_state(p, inputs, targets, config, init=warm)

    coupling_grads = []
    for l, g in enumerate(params.couplings):
        grad = np.zeros_like(g)
        for j in range(g.shape[0]):
            for k in range(2 if l + 1 < params.num_layers else 0, g.shape[1]):
                if g[j, k] < h:
                    raise DimensionError(
                        f"coupling[{l}][{j},{k}]={g[j, k]} too small for centered step {h}")
                grad[j, k] = (cost(perturbed(l, j, k, False, h))
                              - cost(perturbed(l, j, k, False, -h))) / (2.0 * h)
        coupling_grads.append(grad)

    leak_grads = [np.zeros_like(v) for v in params.leaks]
    if params.leaks_enabled:
        for l, vec in enumerate(params.leaks):
            for k in range(2 if l + 1 < params.num_layers else 0, vec.shape[0]):
                if vec[k] < h:
                    raise DimensionError(f"leak[{l}][{k}]={vec[k]} too small for centered step {h}")
                leak_grads[l][k] = (cost(perturbed(l, 0, k, True, h))
                                    - cost(perturbed(l, 0, k, True, -h))) / (2.0 * h)
    return coupling_grads, leak_grads

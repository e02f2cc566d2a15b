"""Translate a ReLU network into an approximately equivalent resistive network.

Every hidden unit of the source net becomes a pair of circuit units (one
excitatory, one inhibitory) whose potentials track +/- gain * state. A
weight w between units maps to four conductances that split w's positive
and negative parts across the pair wiring, scaled by gamma^layer so the
circuit behaves feedforward; biases ride along as conductances from the
pinned bias pair. Per-unit leaks pad every column's conductance sum up to a
uniform layer total, which makes the layer act as a fixed-gain divider. The
approximation error of the finished circuit is O(gamma * |x|_inf).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLayerError, DimensionError
from .model import DrnParams, encode_input
from .relu import ReluNet, relu_forward
from .solver import SolverConfig, solve_steady_state


@dataclass(frozen=True)
class CompileConfig:
    """gamma is the layerwise conductance scaling factor (0 < gamma <= 1);
    smaller gamma means a more faithful but worse-conditioned circuit."""

    gamma: float = 1e-2
    include_output_leaks: bool = True

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise DimensionError(f"gamma must lie in (0, 1], got {self.gamma}")


def _extended_weights(net: ReluNet, l: int) -> np.ndarray:
    """Weights of layer l (1-based) with the bias row prepended as row 0."""
    return np.vstack([net.biases[l - 1][None, :], net.weights[l - 1]])


def layer_gain(net: ReluNet, l: int) -> float:
    """Largest column sum of absolute weights (bias included) of layer l.

    This is the uniform conductance total every unit of the compiled layer
    is padded to, hence the factor by which the layer attenuates signals.
    """
    if not 1 <= l <= net.num_layers:
        raise DimensionError(f"layer index {l} out of range 1..{net.num_layers}")
    a = float(np.abs(_extended_weights(net, l)).sum(axis=0).max())
    if a == 0.0:
        raise DegenerateLayerError(
            f"layer {l} has all-zero weights and biases; its gain is undefined")
    return a


def layer_gains(net: ReluNet) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-layer attenuations a(1)..a(L) and the compensating amplification
    factors A(0)..A(L-1), where A(l) is the product of the a's above l."""
    a = tuple(layer_gain(net, l) for l in range(1, net.num_layers + 1))
    big = []
    acc = 1.0
    for al in reversed(a):
        acc *= al
        big.append(acc)
    return a, tuple(reversed(big))


def compile_relu_net(net: ReluNet, cfg: CompileConfig = CompileConfig()) -> DrnParams:
    """Build the conductance network that approximates `net`.

    Hidden pair wiring between source pair j and target pair k (gamma^l w):
    the positive part of the scaled weight goes on the direct branches
    (even-even, odd-odd), the negative part on the crossed ones, so exactly
    one of each pair of branches is nonzero. The output layer keeps single
    linear units and uses the same split with rows only.
    """
    a, gains = layer_gains(net)
    L = net.num_layers
    dims = net.dims
    widths = tuple(2 * d + 2 for d in dims[:-1]) + (dims[-1],)
    couplings = []
    leaks = []
    for l in range(1, L + 1):
        w = cfg.gamma ** l * _extended_weights(net, l)
        pos = np.maximum(0.0, w)
        neg = np.maximum(0.0, -w)
        g = np.zeros((widths[l - 1], widths[l]))
        if l < L:
            g[0::2, 2::2] = pos
            g[0::2, 3::2] = neg
            g[1::2, 2::2] = neg
            g[1::2, 3::2] = pos
        else:
            g[0::2, :] = pos
            g[1::2, :] = neg
        couplings.append(g)

        column_abs = np.abs(_extended_weights(net, l)).sum(axis=0)
        pad = cfg.gamma ** l * (a[l - 1] - column_abs)
        leak = np.zeros(widths[l])
        if l < L:
            leak[2::2] = pad
            leak[3::2] = pad
        elif cfg.include_output_leaks:
            leak[:] = pad
        leaks.append(leak)

    return DrnParams(
        couplings=tuple(couplings),
        leaks=tuple(leaks),
        gains=gains,
        leaks_enabled=True,
    )


@dataclass
class CompilationReport:
    """Deviations between the circuit steady state and the source net.

    hidden_dev[i] is the worst |v_even - A*s| over hidden layer i+1;
    antisym_defect[i] the worst |v_odd + v_even| there. output_dev compares
    output potentials with the net's outputs directly.
    """

    output_dev: float
    hidden_dev: list[float]
    antisym_defect: list[float]
    solver_iterations: int
    solver_delta: float

    @property
    def max_antisym_defect(self) -> float:
        return max(self.antisym_defect, default=0.0)


def verify_compilation(net: ReluNet, params: DrnParams, x_batch,
                       config: SolverConfig | None = None) -> CompilationReport:
    """Solve the compiled circuit on a batch of inputs and report how far it
    deviates from the exact forward pass."""
    if config is None:
        config = SolverConfig(num_iterations=10000, convergence_tol=1e-12, certify=False)
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    acts = relu_forward(net, x_batch)
    _, gains = layer_gains(net)
    inputs = encode_input(x_batch, gains[0])
    result = solve_steady_state(params, inputs, config)
    v = result.state.potentials

    hidden_dev = []
    antisym = []
    for l in range(1, net.num_layers):
        even = v[l][:, 2::2]
        odd = v[l][:, 3::2]
        hidden_dev.append(float(np.abs(even - gains[l] * acts.layers[l]).max()))
        antisym.append(float(np.abs(odd + even).max()))
    output_dev = float(np.abs(v[-1] - acts.layers[-1]).max())
    return CompilationReport(output_dev, hidden_dev, antisym,
                             result.iterations, result.last_delta)

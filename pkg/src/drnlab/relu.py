"""Reference ReLU multilayer perceptron.

This is the ground-truth feedforward model that compiled resistive networks
are checked against: an exact forward pass, a seeded initializer, and a
binary weight-file format shared with the circuit compiler.

All arithmetic is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError

WEIGHT_FILE_MAGIC = b"RNN1"


@dataclass(frozen=True)
class ReluNet:
    """A multilayer perceptron with ReLU hidden units and a linear output layer.

    dims[0] is the input width, dims[-1] the output width. weights[l] has
    shape (dims[l], dims[l+1]); biases[l] has length dims[l+1]. Hidden layers
    apply max(0, .), the last layer is affine.
    """

    dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.dims) < 2:
            raise DimensionError("a net needs at least an input and an output layer")
        if any(int(d) <= 0 for d in self.dims):
            raise DimensionError(f"layer dims must be positive, got {self.dims}")
        if len(self.weights) != self.num_layers or len(self.biases) != self.num_layers:
            raise DimensionError("need one weight matrix and one bias vector per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.dims[l], self.dims[l + 1])
            if w.shape != expected:
                raise DimensionError(f"weights[{l}] has shape {w.shape}, expected {expected}")
            if b.shape != (self.dims[l + 1],):
                raise DimensionError(f"biases[{l}] has shape {b.shape}, expected ({self.dims[l + 1]},)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise DimensionError(f"layer {l + 1} contains non-finite parameters")

    @property
    def num_layers(self) -> int:
        return len(self.dims) - 1


def make_relu_net(dims, weights, biases) -> ReluNet:
    """Build a ReluNet from array-likes, normalizing everything to float64."""
    dims = tuple(int(d) for d in dims)
    weights = tuple(np.ascontiguousarray(w, dtype=np.float64) for w in weights)
    biases = tuple(np.ascontiguousarray(b, dtype=np.float64) for b in biases)
    return ReluNet(dims, weights, biases)


@dataclass(frozen=True)
class ReluActivations:
    """Per-layer states of a forward pass; layers[0] is the input itself."""

    layers: tuple[np.ndarray, ...]

    @property
    def output(self) -> np.ndarray:
        return self.layers[-1]


def relu_forward(net: ReluNet, x) -> ReluActivations:
    """Run the exact forward pass.

    x may be a single vector (length dims[0]) or a batch (batch, dims[0]);
    each returned layer has the same leading shape as x.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.dims[0]:
        raise DimensionError(f"input has shape {x.shape}, expected (*, {net.dims[0]})")
    if not np.isfinite(x).all():
        raise DimensionError("input contains non-finite values")

    layers = [x]
    s = x
    for l in range(net.num_layers):
        s = s @ net.weights[l] + net.biases[l]
        if l < net.num_layers - 1:
            s = np.maximum(0.0, s)
        layers.append(s)
    if single:
        layers = [a[0] for a in layers]
    return ReluActivations(tuple(layers))


def init_relu_net(dims, seed) -> ReluNet:
    """Kaiming-uniform initialization: w ~ U(-c, c) with c = sqrt(1/fan_in).

    Biases start at zero. Reproducible: the seed is split into one child
    stream per layer with numpy's SeedSequence.spawn, and layer l draws its
    weights from PCG64(child[l]), so nets with a common prefix of dims share
    their early layers.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise DimensionError(f"invalid dims {dims}")
    children = np.random.SeedSequence(seed).spawn(len(dims) - 1)
    weights = []
    biases = []
    for l in range(len(dims) - 1):
        rng = np.random.default_rng(children[l])
        c = np.sqrt(1.0 / dims[l])
        weights.append(rng.uniform(-c, c, size=(dims[l], dims[l + 1])))
        biases.append(np.zeros(dims[l + 1]))
    return ReluNet(dims, tuple(weights), tuple(biases))


def save_relu_net(net: ReluNet, path):
    """Write the little-endian binary weight file.

    Layout: magic "RNN1", u32 L, u32 dims[0..L], then per layer the row-major
    float64 weight matrix followed by the float64 bias vector. Bit-exact.
    """
    with open(path, "wb") as f:
        f.write(WEIGHT_FILE_MAGIC)
        f.write(struct.pack("<I", net.num_layers))
        f.write(struct.pack(f"<{len(net.dims)}I", *net.dims))
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_relu_net(path) -> ReluNet:
    """Read a weight file written by save_relu_net."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != WEIGHT_FILE_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r} at offset 0, expected {WEIGHT_FILE_MAGIC!r}")
    offset = 4
    (num_layers,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if num_layers < 1:
        raise FormatError(f"layer count {num_layers} at offset 4 is invalid")
    if len(data) < offset + 4 * (num_layers + 1):
        raise FormatError(f"truncated header at offset {len(data)}")
    dims = struct.unpack_from(f"<{num_layers + 1}I", data, offset)
    offset += 4 * (num_layers + 1)
    weights = []
    biases = []
    for l in range(num_layers):
        for shape in ((dims[l], dims[l + 1]), (dims[l + 1],)):
            n = int(np.prod(shape))
            end = offset + 8 * n
            if end > len(data):
                raise FormatError(f"truncated payload at offset {offset} (need {8 * n} bytes)")
            arr = np.frombuffer(data[offset:end], dtype="<f8").reshape(shape)
            offset = end
            if len(shape) == 2:
                weights.append(arr)
            else:
                biases.append(arr)
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes at offset {offset}")
    return make_relu_net(dims, weights, biases)

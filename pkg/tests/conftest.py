"""Shared builders for small test networks and datasets."""

import numpy as np
import pytest

from drnlab.data import write_idx
from drnlab.model import DrnParams, encode_input, random_drn
from drnlab.relu import init_relu_net, make_relu_net


def random_relu_net(dims, seed, bias_scale=0.5):
    """Seeded net with Kaiming weights and uniform random biases."""
    net = init_relu_net(dims, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 977]))
    biases = tuple(rng.uniform(-bias_scale, bias_scale, size=b.shape) for b in net.biases)
    return make_relu_net(net.dims, net.weights, biases)


def random_tiny_drn(seed, rng=None):
    """Random small network with strictly positive leaks (unique steady state).

    Depth and widths vary with the seed: 1 to 3 coupling layers, signal
    widths <= 6 circuit nodes per layer.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 31337]))
    depth = int(rng.integers(1, 4))
    q = int(rng.integers(1, 3))
    hidden = [int(rng.integers(1, 3)) for _ in range(depth - 1)]
    r = int(rng.integers(1, 7))
    dims = (q, *hidden, r)
    a0 = float(rng.uniform(0.5, 3.0))
    return random_drn(dims, seed, a0=a0, leaks_enabled=True)


def random_encoded_inputs(params, rng, batch=1, scale=1.0):
    x = rng.uniform(-scale, scale, size=(batch, params.num_inputs))
    return encode_input(x, params.gains[0])


def dense_ep_instance(seed, with_hidden=True):
    """Tiny instance with strictly positive conductances everywhere, suitable
    for centered finite differences (every g can move by +/-h)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 555]))
    q = int(rng.integers(1, 3))
    if with_hidden:
        r = int(rng.integers(1, 4))
        widths = (2 * q + 2, 4, r)
        g1 = np.zeros((widths[0], 4))
        g1[:, 2:] = rng.uniform(0.1, 1.0, (widths[0], 2))
        g2 = rng.uniform(0.1, 1.0, (4, r))
        leak1 = np.zeros(4)
        leak1[2:] = rng.uniform(0.1, 0.5, 2)
        leak2 = rng.uniform(0.1, 0.5, r)
        params = DrnParams((g1, g2), (leak1, leak2), gains=(1.0, 1.0), leaks_enabled=True)
    else:
        r = int(rng.integers(1, 6))
        g1 = rng.uniform(0.1, 1.0, (2 * q + 2, r))
        leak = rng.uniform(0.1, 0.5, r)
        params = DrnParams((g1,), (leak,), gains=(1.0,), leaks_enabled=True)
    x = rng.uniform(-1.0, 1.0, size=(1, q))
    y = rng.uniform(-0.5, 0.5, size=(1, params.widths[-1]))
    return params, encode_input(x, 1.0), y


def write_synthetic_dataset(directory, *, side=6, classes=10, n_train=128, n_test=64,
                            seed=0, learnable=True):
    """Small IDX dataset; learnable ones use noisy class prototypes."""
    rng = np.random.default_rng(seed)
    q = side * side
    proto = rng.uniform(0.3, 1.0, (classes, q)) * (rng.random((classes, q)) < 0.3)

    def draw(n):
        labels = rng.integers(0, classes, n)
        if learnable:
            images = np.clip(proto[labels] + 0.05 * rng.standard_normal((n, q)), 0.0, 1.0)
        else:
            images = rng.random((n, q))
        return np.round(images * 255).astype(np.uint8).reshape(n, side, side), labels.astype(np.uint8)

    train_images, train_labels = draw(n_train)
    test_images, test_labels = draw(n_test)

    directory.mkdir(parents=True, exist_ok=True)
    write_idx(directory / "train-images-idx3-ubyte", train_images)
    write_idx(directory / "train-labels-idx1-ubyte", train_labels)
    write_idx(directory / "t10k-images-idx3-ubyte", test_images)
    write_idx(directory / "t10k-labels-idx1-ubyte", test_labels)
    return directory


@pytest.fixture
def synthetic_dataset(tmp_path):
    return write_synthetic_dataset(tmp_path / "blobs", seed=11)

import numpy as np
import pytest

from relu_unwrap.networks import FeedforwardNetwork


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def loop_forward(net: FeedforwardNetwork, x):
    """Plain-Python forward pass used as an independent oracle."""
    h = [float(v) for v in x]
    layers = net.layers
    for idx, (w, b) in enumerate(layers):
        z = [sum(float(w[i, k]) * h[k] for k in range(len(h))) + float(b[i]) for i in range(w.shape[0])]
        h = z if idx == len(layers) - 1 else [max(0.0, v) for v in z]
    return np.array(h)


@pytest.fixture
def quadrant_net():
    return FeedforwardNetwork(((np.eye(2), np.zeros(2)), ([[1.0, 1.0]], [0.0])))


@pytest.fixture
def single_relu_net():
    return FeedforwardNetwork((([[1.0]], [0.0]), ([[1.0]], [0.0])))

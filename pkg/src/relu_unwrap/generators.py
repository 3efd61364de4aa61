"""Seeded random networks for tests, verification runs and experiments."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .networks import FeedforwardNetwork, GcnNetwork, MultiplicativeLayer, TensorNetwork


def _he(rng, fan_in, shape, integer):
    if integer:
        return rng.integers(-3, 4, size=shape).astype(np.float64)
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def random_feedforward(rng: np.random.Generator, sizes: Sequence[int], integer: bool = False) -> FeedforwardNetwork:
    """``sizes = [n_in, h_1, ..., h_L, n_out]``."""
    layers = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = _he(rng, n_in, (n_out, n_in), integer)
        b = rng.integers(-2, 3, size=n_out).astype(np.float64) if integer else rng.normal(0, 0.5, n_out)
        layers.append((w, b))
    return FeedforwardNetwork(tuple(layers))


def random_gcn(rng: np.random.Generator, k: int, dims: Sequence[int], operator=None,
               integer: bool = False) -> GcnNetwork:
    """GCN on ``k`` nodes with channel sizes ``dims = [n_0, ..., n_L, n_out]``."""
    layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        a = operator if operator is not None else _he(rng, k, (k, k), integer)
        w = _he(rng, n_in, (n_in, n_out), integer)
        b = rng.integers(-2, 3, size=(k, n_out)).astype(np.float64) if integer else rng.normal(0, 0.5, (k, n_out))
        layers.append((a, w, b))
    return GcnNetwork(tuple(layers))


def random_tensor(rng: np.random.Generator, shapes: Sequence[Sequence[int]], integer: bool = False,
                  identity_side_modes: bool = False) -> TensorNetwork:
    """Tensor network whose activations take the successive ``shapes``."""
    layers = []
    for s_in, s_out in zip(shapes[:-1], shapes[1:]):
        mats = []
        for mode, (a, b) in enumerate(zip(s_in, s_out)):
            if identity_side_modes and mode > 0:
                mats.append(np.eye(a, b))
            else:
                mats.append(_he(rng, a, (a, b), integer))
        bias = rng.integers(-2, 3, size=tuple(s_out)).astype(np.float64) if integer else rng.normal(0, 0.5, tuple(s_out))
        layers.append((mats, bias))
    return TensorNetwork(tuple(layers))


def random_multiplicative(rng: np.random.Generator, n1: int, n2: int, m: int) -> MultiplicativeLayer:
    return MultiplicativeLayer(rng.normal(size=(m, n1)), rng.normal(size=m),
                               rng.normal(size=(m, n2)), rng.normal(size=m))

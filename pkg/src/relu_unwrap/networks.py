"""Network containers and forward passes that record activation patterns.

Every family follows the same layout: ``L >= 1`` ReLU layers followed by one
affine readout layer without activation.  A neuron is *active* iff its
pre-activation is strictly positive (``s(0) = 0``).
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from .linalg import (
    ShapeError,
    as_matrix,
    as_tensor,
    as_vector,
    kron,
    tucker_contract,
    tucker_matrix,
    vec,
)

__all__ = [
    "ActivationPattern",
    "FeedforwardNetwork",
    "GcnNetwork",
    "TensorNetwork",
    "MultiplicativeLayer",
    "Network",
    "forward",
    "pattern_of",
    "relu",
    "state",
]


def relu(z):
    return np.maximum(z, 0.0)


def state(z) -> np.ndarray:
    """Binary activation state, 1 iff the pre-activation is > 0."""
    return (np.asarray(z) > 0).astype(np.int8)


class ActivationPattern:
    """Per-layer 0/1 arrays, shaped like each hidden layer's pre-activation."""

    __slots__ = ("layers", "_key")

    def __init__(self, layers: Sequence):
        arrs = []
        for i, layer in enumerate(layers):
            a = np.array(layer, dtype=np.int8)
            if a.ndim == 0:
                raise ShapeError(f"pattern layer {i} must be at least one-dimensional")
            if not np.all((a == 0) | (a == 1)):
                raise ValueError(f"pattern layer {i} has entries outside {{0, 1}}")
            a.setflags(write=False)
            arrs.append(a)
        self.layers = tuple(arrs)
        self._key = tuple((a.shape, a.tobytes()) for a in self.layers)

    @property
    def shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(a.shape for a in self.layers)

    def flat(self) -> np.ndarray:
        """All states concatenated, each layer vectorized first-index-fastest."""
        if not self.layers:
            return np.zeros(0, dtype=np.int8)
        return np.concatenate([vec(a) for a in self.layers])

    def vectorized(self) -> "ActivationPattern":
        """Same pattern with every layer flattened by ``vec``."""
        return ActivationPattern([vec(a) for a in self.layers])

    @classmethod
    def from_flat(cls, bits, shapes) -> "ActivationPattern":
        bits = np.asarray(bits, dtype=np.int8)
        out, pos = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            out.append(bits[pos:pos + size].reshape(tuple(shape), order="F"))
            pos += size
        if pos != bits.size:
            raise ShapeError(f"{bits.size} bits do not fit layer shapes {list(shapes)}")
        return cls(out)

    def bitstring(self) -> str:
        return "".join(str(int(b)) for b in self.flat())

    def __eq__(self, other):
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"ActivationPattern({[a.tolist() for a in self.layers]})"


def _check_pattern(p: ActivationPattern, shapes) -> None:
    if not isinstance(p, ActivationPattern):
        p = ActivationPattern(p)
    if p.shapes != tuple(tuple(s) for s in shapes):
        raise ShapeError(f"pattern shapes {list(p.shapes)} do not match layer shapes {list(shapes)}")


@dataclass(frozen=True, eq=False)
class FeedforwardNetwork:
    """``layers[l] = (W, b)`` with ``W`` of shape ``n_{l+1} x n_l``; the last is the readout."""

    layers: tuple

    def __post_init__(self):
        layers = []
        for l, (w, b) in enumerate(self.layers):
            w = as_matrix(w, f"layers[{l}].weight")
            b = as_vector(b, f"layers[{l}].bias")
            if b.shape[0] != w.shape[0]:
                raise ShapeError(
                    f"layers[{l}]: bias length {b.shape[0]} != weight rows {w.shape[0]}"
                )
            if layers and w.shape[1] != layers[-1][0].shape[0]:
                raise ShapeError(
                    f"layers[{l}].weight has {w.shape[1]} columns but layers[{l - 1}] "
                    f"outputs {layers[-1][0].shape[0]}"
                )
            layers.append((w, b))
        if len(layers) < 2:
            raise ShapeError("a network needs at least one hidden layer and a readout layer")
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def hidden_sizes(self) -> list[int]:
        return [w.shape[0] for w, _ in self.layers[:-1]]

    @property
    def pattern_shapes(self) -> list[tuple[int, ...]]:
        return [(n,) for n in self.hidden_sizes]

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.input_dim,)

    @property
    def n_hidden(self) -> int:
        return sum(self.hidden_sizes)

    def preactivations(self, x) -> list[np.ndarray]:
        """Hidden pre-activations for a point ``(n,)`` or a batch ``(N, n)``."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.input_dim or h.ndim not in (1, 2):
            raise ShapeError(f"input shape {h.shape} does not match input dimension {self.input_dim}")
        zs = []
        for w, b in self.layers[:-1]:
            z = h @ w.T + b
            zs.append(z)
            h = relu(z)
        return zs

    def forward(self, x):
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.input_dim or h.ndim not in (1, 2):
            raise ShapeError(f"input shape {h.shape} does not match input dimension {self.input_dim}")
        if not np.all(np.isfinite(h)):
            raise ValueError("input has non-finite entries")
        states = []
        for w, b in self.layers[:-1]:
            z = h @ w.T + b
            states.append(state(z))
            h = relu(z)
        w, b = self.layers[-1]
        return h @ w.T + b, states

    def to_feedforward(self) -> "FeedforwardNetwork":
        return self


@dataclass(frozen=True, eq=False)
class GcnNetwork:
    """``layers[l] = (A, W, B)``: ``X -> A @ X @ W + B`` with ``A`` ``k x k`` and ``B`` ``k x n_l``."""

    layers: tuple

    def __post_init__(self):
        layers = []
        k = None
        for l, (a, w, b) in enumerate(self.layers):
            a = as_matrix(a, f"layers[{l}].operator")
            w = as_matrix(w, f"layers[{l}].weight")
            b = as_matrix(b, f"layers[{l}].bias")
            if a.shape[0] != a.shape[1]:
                raise ShapeError(f"layers[{l}].operator must be square, got {a.shape}")
            if k is None:
                k = a.shape[0]
            elif a.shape[0] != k:
                raise ShapeError(f"layers[{l}].operator is {a.shape}, expected {k}x{k}")
            if b.shape != (k, w.shape[1]):
                raise ShapeError(f"layers[{l}].bias is {b.shape}, expected {(k, w.shape[1])}")
            if layers and w.shape[0] != layers[-1][1].shape[1]:
                raise ShapeError(
                    f"layers[{l}].weight has {w.shape[0]} rows but layers[{l - 1}] "
                    f"outputs {layers[-1][1].shape[1]} channels"
                )
            layers.append((a, w, b))
        if len(layers) < 2:
            raise ShapeError("a network needs at least one hidden layer and a readout layer")
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def node_count(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.node_count, self.layers[0][1].shape[0])

    @property
    def output_shape(self) -> tuple[int, int]:
        return (self.node_count, self.layers[-1][1].shape[1])

    @property
    def pattern_shapes(self) -> list[tuple[int, ...]]:
        return [b.shape for _, _, b in self.layers[:-1]]

    def forward(self, x):
        h = np.asarray(x, dtype=np.float64)
        if h.shape != self.input_shape:
            raise ShapeError(f"input shape {h.shape} does not match {self.input_shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("input has non-finite entries")
        states = []
        for a, w, b in self.layers[:-1]:
            z = a @ h @ w + b
            states.append(state(z))
            h = relu(z)
        a, w, b = self.layers[-1]
        return a @ h @ w + b, states

    def to_feedforward(self) -> FeedforwardNetwork:
        """Equivalent network over ``vec(X)``; layer weights are ``kron(W.T, A)``."""
        return FeedforwardNetwork(tuple((kron(w.T, a), vec(b)) for a, w, b in self.layers))


@dataclass(frozen=True, eq=False)
class TensorNetwork:
    """``layers[l] = (mats, bias)``: ``X -> tucker_contract(X, mats) + bias``."""

    layers: tuple

    def __post_init__(self):
        layers = []
        for l, (mats, bias) in enumerate(self.layers):
            mats = tuple(as_matrix(m, f"layers[{l}].mode_mats[{i}]") for i, m in enumerate(mats))
            bias = as_tensor(bias, f"layers[{l}].bias")
            if not mats:
                raise ShapeError(f"layers[{l}] has no mode matrices")
            out_shape = tuple(m.shape[1] for m in mats)
            if bias.shape != out_shape:
                raise ShapeError(f"layers[{l}].bias is {bias.shape}, expected {out_shape}")
            if layers:
                prev = layers[-1][1].shape
                if len(mats) != len(prev):
                    raise ShapeError(
                        f"layers[{l}] has {len(mats)} mode matrices but the activation has order {len(prev)}"
                    )
                for i, (m, d) in enumerate(zip(mats, prev)):
                    if m.shape[0] != d:
                        raise ShapeError(
                            f"layers[{l}].mode_mats[{i}] has {m.shape[0]} rows, expected {d}"
                        )
            layers.append((mats, bias))
        if len(layers) < 2:
            raise ShapeError("a network needs at least one hidden layer and a readout layer")
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def input_shape(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.layers[0][0])

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.layers[-1][1].shape

    @property
    def pattern_shapes(self) -> list[tuple[int, ...]]:
        return [b.shape for _, b in self.layers[:-1]]

    def forward(self, x):
        h = np.asarray(x, dtype=np.float64)
        if h.shape != self.input_shape:
            raise ShapeError(f"input shape {h.shape} does not match {self.input_shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("input has non-finite entries")
        states = []
        for mats, b in self.layers[:-1]:
            z = tucker_contract(h, mats) + b
            states.append(state(z))
            h = relu(z)
        mats, b = self.layers[-1]
        return tucker_contract(h, mats) + b, states

    def to_feedforward(self) -> FeedforwardNetwork:
        """Equivalent network over ``vec(X)``; layer weights are ``tucker_matrix(mats)``."""
        return FeedforwardNetwork(tuple((tucker_matrix(mats), vec(b)) for mats, b in self.layers))


@dataclass(frozen=True, eq=False)
class MultiplicativeLayer:
    """``relu(w @ x1 + b) * relu(v @ x2 + c)``."""

    w: np.ndarray
    b: np.ndarray
    v: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        w, v = as_matrix(self.w, "w"), as_matrix(self.v, "v")
        b, c = as_vector(self.b, "b"), as_vector(self.c, "c")
        if w.shape[0] != v.shape[0] or b.shape[0] != w.shape[0] or c.shape[0] != v.shape[0]:
            raise ShapeError(
                f"branch output dimensions differ: w {w.shape}, b {b.shape}, v {v.shape}, c {c.shape}"
            )
        for name, val in (("w", w), ("b", b), ("v", v), ("c", c)):
            object.__setattr__(self, name, val)

    def forward(self, x1, x2):
        z1 = self.w @ np.asarray(x1, dtype=np.float64) + self.b
        z2 = self.v @ np.asarray(x2, dtype=np.float64) + self.c
        return relu(z1) * relu(z2), (state(z1), state(z2))


Network = Union[FeedforwardNetwork, GcnNetwork, TensorNetwork]


def forward(net: Network, x) -> tuple[np.ndarray, ActivationPattern]:
    """Evaluate ``net`` at a single input; returns (output, activation pattern)."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(net, FeedforwardNetwork) and x.ndim != 1:
        raise ShapeError(f"expected a single input vector, got shape {x.shape}")
    out, states = net.forward(x)
    return out, ActivationPattern(states)


def pattern_of(net: Network, x) -> ActivationPattern:
    return forward(net, x)[1]

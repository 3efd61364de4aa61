"""Exact local linear models of ReLU networks on an activation region."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ShapeError, as_vector, kron, tucker_matrix, vec
from .networks import (
    ActivationPattern,
    FeedforwardNetwork,
    GcnNetwork,
    MultiplicativeLayer,
    TensorNetwork,
    _check_pattern,
)

__all__ = [
    "LocalLinearModel",
    "BilinearExpansion",
    "unwrap",
    "unwrap_feedforward",
    "unwrap_gcn",
    "unwrap_tensor",
    "partial_models",
    "decompose_multiplicative",
]


@dataclass(frozen=True, eq=False)
class LocalLinearModel:
    """Affine map ``x -> weight @ vec(x) + bias`` valid on one activation region."""

    weight: np.ndarray
    bias: np.ndarray
    pattern: ActivationPattern
    input_shape: tuple = ()
    output_shape: tuple = ()

    def evaluate(self, x) -> np.ndarray:
        """Evaluate at a single point; matrix/tensor inputs are vectorized first."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim > 1:
            x = vec(x)
        if x.shape != (self.weight.shape[1],):
            raise ShapeError(f"input of length {x.size} for a model over {self.weight.shape[1]} features")
        return self.weight @ x + self.bias


def _mask_rows(m: np.ndarray, d: np.ndarray) -> np.ndarray:
    # Hadamard product with the 0/1 mask tiled across columns, i.e. diag(d) @ m
    return d[:, None] * m if m.ndim == 2 else d * m


def _compose(layers, masks) -> tuple[np.ndarray, np.ndarray]:
    w, b = layers[0]
    w, b = w.copy(), b.copy()
    for (wn, bn), d in zip(layers[1:], masks):
        d = d.astype(np.float64)
        w = wn @ _mask_rows(w, d)
        b = wn @ (d * b) + bn
    return w, b


def partial_models(net: FeedforwardNetwork, p: ActivationPattern) -> list[tuple[np.ndarray, np.ndarray]]:
    """Affine maps from the input to each hidden layer's pre-activations.

    Entry ``j`` depends only on the pattern of layers ``< j``.
    """
    _check_pattern(p, net.pattern_shapes)
    layers = net.layers
    w, b = layers[0]
    out = [(w.copy(), b.copy())]
    for l in range(1, len(layers) - 1):
        d = p.layers[l - 1].astype(np.float64)
        wn, bn = layers[l]
        w = wn @ _mask_rows(out[-1][0], d)
        b = wn @ (d * out[-1][1]) + bn
        out.append((w, b))
    return out


def unwrap_feedforward(net: FeedforwardNetwork, p: ActivationPattern) -> LocalLinearModel:
    """Local linear model ``W_L D_L ... D_1 W_0`` with the matching bias accumulation."""
    if not isinstance(p, ActivationPattern):
        p = ActivationPattern(p)
    _check_pattern(p, net.pattern_shapes)
    w, b = _compose(net.layers, p.layers)
    return LocalLinearModel(w, b, p, (net.input_dim,), (net.output_dim,))


def unwrap_gcn(net: GcnNetwork, p: ActivationPattern) -> LocalLinearModel:
    """Local model over ``vec(X)``; each layer acts as ``kron(W.T, A)`` masked by ``vec(P)``."""
    if not isinstance(p, ActivationPattern):
        p = ActivationPattern(p)
    _check_pattern(p, net.pattern_shapes)
    layers = [(kron(w.T, a), vec(b)) for a, w, b in net.layers]
    w, b = _compose(layers, [vec(m) for m in p.layers])
    return LocalLinearModel(w, b, p, net.input_shape, net.output_shape)


def unwrap_tensor(net: TensorNetwork, p: ActivationPattern) -> LocalLinearModel:
    """Local model over ``vec(X)``; each layer acts as ``tucker_matrix(mats)`` masked by ``vec(P)``."""
    if not isinstance(p, ActivationPattern):
        p = ActivationPattern(p)
    _check_pattern(p, net.pattern_shapes)
    layers = [(tucker_matrix(mats), vec(b)) for mats, b in net.layers]
    w, b = _compose(layers, [vec(m) for m in p.layers])
    return LocalLinearModel(w, b, p, net.input_shape, net.output_shape)


def unwrap(net, p: ActivationPattern) -> LocalLinearModel:
    if isinstance(net, FeedforwardNetwork):
        return unwrap_feedforward(net, p)
    if isinstance(net, GcnNetwork):
        return unwrap_gcn(net, p)
    if isinstance(net, TensorNetwork):
        return unwrap_tensor(net, p)
    raise TypeError(f"cannot unwrap {type(net).__name__}")


@dataclass(frozen=True)
class BilinearExpansion:
    """Four-term expansion of ``relu(W x1 + b) * relu(V x2 + c)`` on a fixed pattern.

    ``masked_b = D1 b`` and ``masked_c = D2 c``.
    """

    bilinear: np.ndarray       # D1 W x1 * D2 V x2
    left_bias_term: np.ndarray  # D1 b * D2 V x2
    right_bias_term: np.ndarray  # D2 c * D1 W x1
    constant: np.ndarray        # D1 b * D2 c

    @property
    def total(self) -> np.ndarray:
        return self.bilinear + self.left_bias_term + self.right_bias_term + self.constant


def decompose_multiplicative(layer: MultiplicativeLayer, p1, p2, x1, x2) -> BilinearExpansion:
    x1 = as_vector(x1, "x1")
    x2 = as_vector(x2, "x2")
    d1 = np.asarray(p1, dtype=np.float64)
    d2 = np.asarray(p2, dtype=np.float64)
    n = layer.w.shape[0]
    if x1.shape[0] != layer.w.shape[1] or x2.shape[0] != layer.v.shape[1]:
        raise ShapeError(
            f"inputs of length {x1.shape[0]}, {x2.shape[0]} for branches expecting "
            f"{layer.w.shape[1]}, {layer.v.shape[1]}"
        )
    if d1.shape != (n,) or d2.shape != (n,):
        raise ShapeError(f"patterns must have length {n}, got {d1.shape}, {d2.shape}")
    left = d1 * (layer.w @ x1)
    right = d2 * (layer.v @ x2)
    mb = d1 * layer.b
    mc = d2 * layer.c
    return BilinearExpansion(left * right, mb * right, mc * left, mb * mc)

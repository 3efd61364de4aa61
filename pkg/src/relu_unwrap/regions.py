"""Half-space descriptions of activation regions and region enumeration."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .linalg import ShapeError
from .networks import ActivationPattern, FeedforwardNetwork
from .unwrap import partial_models

__all__ = [
    "HalfSpace",
    "RegionDescription",
    "RegionWitness",
    "EnumerationRefused",
    "region_halfspaces",
    "membership",
    "find_interior_point",
    "region_witness",
    "enumerate_regions",
    "batch_patterns",
]

log = logging.getLogger(__name__)


class EnumerationRefused(RuntimeError):
    """Exhaustive enumeration requested beyond the configured neuron cap."""


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """Open half-space ``{x : normal @ x + offset > 0}``."""

    normal: np.ndarray
    offset: float
    layer: int = 0
    neuron: int = 0

    @property
    def degenerate(self) -> bool:
        return not np.any(self.normal)

    def contains(self, x) -> bool:
        return bool(self.normal @ np.asarray(x, dtype=np.float64) + self.offset > 0)


@dataclass(frozen=True, eq=False)
class RegionDescription:
    halfspaces: tuple
    pattern: ActivationPattern
    normals: np.ndarray = field(repr=False, default=None)
    offsets: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.normals is None:
            n = len(self.halfspaces[0].normal) if self.halfspaces else 0
            normals = np.array([h.normal for h in self.halfspaces], dtype=np.float64).reshape(len(self.halfspaces), n)
            offsets = np.array([h.offset for h in self.halfspaces], dtype=np.float64)
            object.__setattr__(self, "normals", normals)
            object.__setattr__(self, "offsets", offsets)

    def contains(self, x) -> bool:
        return membership(self, x)


def region_halfspaces(net: FeedforwardNetwork, p: ActivationPattern) -> RegionDescription:
    """One half-space per hidden neuron; all hold strictly exactly on the region of ``p``.

    The condition for neuron ``i`` of hidden layer ``j`` is the pre-activation
    map of that layer (under the pattern of earlier layers), with its sign
    flipped when the neuron is inactive.
    """
    if not isinstance(p, ActivationPattern):
        p = ActivationPattern(p)
    halfspaces = []
    for j, (w, b) in enumerate(partial_models(net, p)):
        signs = 2.0 * p.layers[j] - 1.0
        for i in range(w.shape[0]):
            halfspaces.append(HalfSpace(signs[i] * w[i], float(signs[i] * b[i]), j, i))
    return RegionDescription(tuple(halfspaces), p)


def membership(r: RegionDescription, x) -> bool:
    """True iff every half-space holds strictly at ``x``; an empty description holds everywhere."""
    x = np.asarray(x, dtype=np.float64)
    if not r.halfspaces:
        return True
    if x.shape != (r.normals.shape[1],):
        raise ShapeError(f"point of shape {x.shape} for a region in {r.normals.shape[1]} dimensions")
    return bool(np.all(r.normals @ x + r.offsets > 0))


def find_interior_point(normals, offsets, lo, hi, eps: float = 1e-7):
    """Point in the box whose distance to every hyperplane is at least ``eps``.

    Maximizes the Chebyshev margin ``t`` subject to
    ``normal_i @ x + offset_i >= t * |normal_i|``.  Rows with zero normal are
    constant constraints and must satisfy ``offset > 0``.  Returns ``None``
    when the best margin is below ``eps``.
    """
    normals = np.asarray(normals, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    n = lo.shape[0]
    normals = normals.reshape(-1, n)
    norms = np.linalg.norm(normals, axis=1)
    flat = norms == 0
    if np.any(offsets[flat] <= 0):
        return None
    keep = ~flat
    a, c, nrm = normals[keep], offsets[keep], norms[keep]
    if a.shape[0] == 0:
        return (lo + hi) / 2
    a_ub = np.hstack([-a, nrm[:, None]])
    t_cap = float(np.max(hi - lo)) + 1.0
    bounds = [(float(l), float(h)) for l, h in zip(lo, hi)] + [(None, t_cap)]
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=a_ub, b_ub=c, bounds=bounds, method="highs")
    if res.status != 0 or -res.fun < eps:
        return None
    return np.clip(res.x[:n], lo, hi)


def region_witness(net: FeedforwardNetwork, p: ActivationPattern, lo, hi, eps: float = 1e-7):
    """``eps``-interior point of the region of ``p`` inside the box, or ``None``.

    A neuron whose pre-activation is constant on the region is satisfied when
    its constant agrees with its state (so an identically-zero neuron counts as
    inactive) rather than through the strict half-space test.
    """
    if not isinstance(p, ActivationPattern):
        p = ActivationPattern(p)
    rows, offs = [], []
    for j, (w, b) in enumerate(partial_models(net, p)):
        for i in range(w.shape[0]):
            bit = int(p.layers[j][i])
            if not np.any(w[i]):
                if (b[i] > 0) != bool(bit):
                    return None
                continue
            sign = 1.0 if bit else -1.0
            rows.append(sign * w[i])
            offs.append(sign * b[i])
    return find_interior_point(np.array(rows).reshape(len(rows), net.input_dim), offs, lo, hi, eps)


@dataclass(frozen=True, eq=False)
class RegionWitness:
    pattern: ActivationPattern
    witness: np.ndarray


def batch_patterns(net: FeedforwardNetwork, xs: np.ndarray) -> np.ndarray:
    """Activation states of a batch, one row of concatenated hidden states per point."""
    return np.hstack([(z > 0).astype(np.int8) for z in net.preactivations(xs)])


def _sample_regions(net, lo, hi, count, seed):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(lo, hi, size=(count, lo.shape[0]))
    bits = batch_patterns(net, xs)
    _, first = np.unique(bits, axis=0, return_index=True)
    shapes = net.pattern_shapes
    return [RegionWitness(ActivationPattern.from_flat(bits[i], shapes), xs[i]) for i in sorted(first)]


def _exhaustive_regions(net, lo, hi, eps):
    sizes = net.hidden_sizes
    shapes = net.pattern_shapes
    layers = net.layers
    found = []

    def descend(j, i, map_w, map_b, rows, offs, prefix, current):
        # map_w/map_b: pre-activation map of hidden layer j given layers < j
        if i == sizes[j]:
            layer_bits = np.array(current, dtype=np.int8)
            bits = prefix + [layer_bits]
            if j + 1 == len(sizes):
                x = find_interior_point(rows, offs, lo, hi, eps)
                if x is not None:
                    found.append((bits, x))
                return
            d = layer_bits.astype(np.float64)
            wn, bn = layers[j + 1]
            descend(j + 1, 0, wn @ (d[:, None] * map_w), wn @ (d * map_b) + bn,
                    rows, offs, bits, [])
            return
        for bit in (0, 1):
            w_row, b_i = map_w[i], map_b[i]
            if not np.any(w_row):
                if (b_i > 0) != bool(bit):
                    continue
                descend(j, i + 1, map_w, map_b, rows, offs, prefix, current + [bit])
                continue
            sign = 1.0 if bit else -1.0
            new_rows = rows + [sign * w_row]
            new_offs = offs + [sign * b_i]
            if find_interior_point(new_rows, new_offs, lo, hi, eps) is None:
                continue
            descend(j, i + 1, map_w, map_b, new_rows, new_offs, prefix, current + [bit])

    w0, b0 = layers[0]
    descend(0, 0, w0, b0, [], [], [], [])
    out = []
    for bits, x in found:
        pattern = ActivationPattern(bits)
        got = ActivationPattern.from_flat(batch_patterns(net, x[None, :])[0], shapes)
        if got != pattern:
            log.warning("dropping region %s: witness re-validated as %s",
                        pattern.bitstring(), got.bitstring())
            continue
        out.append(RegionWitness(pattern, x))
    return out


def enumerate_regions(
    net: FeedforwardNetwork,
    lo: Sequence[float],
    hi: Sequence[float],
    strategy: str = "sample",
    count: int = 10000,
    seed: int = 0,
    eps: float = 1e-7,
    max_neurons: int = 20,
) -> list[RegionWitness]:
    """Activation regions meeting the box ``[lo, hi]``, each with a witness point.

    ``strategy="sample"`` keeps the distinct patterns of ``count`` uniform
    samples.  ``strategy="exhaustive"`` walks all candidate patterns in
    layer-major order, pruning a prefix as soon as its half-spaces have no
    ``eps``-interior point in the box, and re-validates each witness with a
    forward pass.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape != (net.input_dim,) or hi.shape != (net.input_dim,):
        raise ShapeError(f"box bounds must have length {net.input_dim}")
    if np.any(hi < lo):
        raise ValueError("box has hi < lo")
    if strategy == "sample":
        regions = _sample_regions(net, lo, hi, count, seed)
    elif strategy == "exhaustive":
        if net.n_hidden > max_neurons:
            raise EnumerationRefused(
                f"{net.n_hidden} hidden neurons exceeds the exhaustive cap of {max_neurons}"
            )
        regions = _exhaustive_regions(net, lo, hi, eps)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return sorted(regions, key=lambda r: r.pattern.bitstring())

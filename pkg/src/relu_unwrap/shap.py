"""Exact Shapley attributions for ReLU networks.

Masked features are replaced by a single baseline point.  ``shap_bruteforce``
only ever evaluates the network; ``shap_local`` and ``shap_global`` work from
local linear models so the two routes can be checked against each other.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np

from .linalg import ShapeError, vec
from .networks import ActivationPattern, FeedforwardNetwork
from .regions import batch_patterns
from .unwrap import LocalLinearModel, unwrap_feedforward

__all__ = [
    "Attribution",
    "ModelCache",
    "CoalitionCapExceeded",
    "RegionPreconditionError",
    "masked_input",
    "shapley_weights",
    "shap_bruteforce",
    "shap_local",
    "shap_global",
]

DEFAULT_MAX_FEATURES = 20
_CHUNK = 1 << 14


class CoalitionCapExceeded(RuntimeError):
    """Exact coalition enumeration refused for too many features."""


class RegionPreconditionError(ValueError):
    """Some masked point leaves the activation region of the explained input."""


@dataclass
class Attribution:
    """``values[i, j]`` is the attribution of feature ``i`` to output ``j``."""

    values: np.ndarray
    input: np.ndarray
    baseline: np.ndarray
    mode: str
    approximate: bool = False
    stats: dict = field(default_factory=dict)


class ModelCache:
    """Pattern -> local linear model memo table with hit statistics."""

    def __init__(self, net: FeedforwardNetwork):
        self.net = net
        self._models: dict[bytes, LocalLinearModel] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.unwraps = 0

    def get_bits(self, bits: np.ndarray) -> LocalLinearModel:
        key = np.asarray(bits, dtype=np.int8).tobytes()
        model = self._models.get(key)
        if model is not None:
            self.hits += 1
            return model
        with self._lock:
            model = self._models.get(key)
            if model is None:
                p = ActivationPattern.from_flat(bits, self.net.pattern_shapes)
                model = unwrap_feedforward(self.net, p)
                self.unwraps += 1
                self._models[key] = model
        return model

    def __len__(self):
        return len(self._models)

    def stats(self) -> dict:
        return {"unwraps": self.unwraps, "hits": self.hits, "distinct_patterns": len(self._models)}


def _prepare(net, x, baseline):
    if not isinstance(net, FeedforwardNetwork):
        net = net.to_feedforward()
    x = vec(np.asarray(x, dtype=np.float64))
    baseline = vec(np.asarray(baseline, dtype=np.float64))
    if x.shape != (net.input_dim,) or baseline.shape != x.shape:
        raise ShapeError(
            f"input {x.shape} and baseline {baseline.shape} must both have {net.input_dim} features"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(baseline))):
        raise ValueError("input and baseline must be finite")
    return net, x, baseline


def masked_input(x, baseline, s) -> np.ndarray:
    """Keep ``x`` on the coalition ``s`` (iterable of feature indices), baseline elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    if x.shape != baseline.shape:
        raise ShapeError(f"input {x.shape} and baseline {baseline.shape} differ in shape")
    keep = np.zeros(x.shape, dtype=bool)
    keep[list(s)] = True
    return np.where(keep, x, baseline)


def shapley_weights(n: int) -> np.ndarray:
    """``w[s] = s! (n - s - 1)! / n!`` for coalition sizes ``s = 0..n-1``."""
    return np.array([factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)])


def _coalition_masks(n: int, codes: np.ndarray) -> np.ndarray:
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CoalitionCapExceeded(f"{n} features exceeds the exact-enumeration cap of {cap}")


def shap_bruteforce(net, x, baseline, max_features: int = DEFAULT_MAX_FEATURES) -> Attribution:
    """Shapley values by evaluating the network on every coalition."""
    net, x, baseline = _prepare(net, x, baseline)
    n = x.shape[0]
    _check_cap(n, max_features)
    codes = np.arange(1 << n, dtype=np.int64)
    values = np.empty((1 << n, net.output_dim))
    for start in range(0, 1 << n, _CHUNK):
        c = codes[start:start + _CHUNK]
        values[start:start + _CHUNK] = net.forward(np.where(_coalition_masks(n, c), x, baseline))[0]
    weights = shapley_weights(n)
    sizes = np.array([bin(int(c)).count("1") for c in codes])
    phi = np.zeros((n, net.output_dim))
    for i in range(n):
        without = codes[(codes >> i) & 1 == 0]
        w = weights[sizes[without]]
        phi[i] = w @ (values[without | (1 << i)] - values[without])
    return Attribution(phi, x, baseline, "bruteforce", stats={"evaluations": 1 << n})


def shap_local(
    net,
    x,
    baseline,
    max_features: int = DEFAULT_MAX_FEATURES,
    check_samples: int = 4096,
    seed: int = 0,
) -> Attribution:
    """Attribution from the single local model at ``x``: ``w[j, i] * (x_i - baseline_i)``.

    Requires every masked point to share the pattern of ``x``.  This is checked
    on all ``2**n`` coalitions up to ``max_features`` and on ``check_samples``
    random coalitions beyond it (the result is then flagged approximate).
    """
    net, x, baseline = _prepare(net, x, baseline)
    n = x.shape[0]
    target = batch_patterns(net, x[None, :])[0]
    approximate = n > max_features
    if approximate:
        rng = np.random.default_rng(seed)
        masks = rng.integers(0, 2, size=(check_samples, n)).astype(bool)
        checked = check_samples
    else:
        masks = None
        checked = 1 << n
    for start in range(0, checked, _CHUNK):
        if masks is None:
            c = np.arange(start, min(start + _CHUNK, checked), dtype=np.int64)
            m = _coalition_masks(n, c)
        else:
            m = masks[start:start + _CHUNK]
        bits = batch_patterns(net, np.where(m, x, baseline))
        bad = np.flatnonzero(np.any(bits != target, axis=1))
        if bad.size:
            coalition = np.flatnonzero(m[bad[0]]).tolist()
            raise RegionPreconditionError(
                f"masked point for coalition {coalition} lies outside the region of the input; "
                "use global mode"
            )
    model = unwrap_feedforward(net, ActivationPattern.from_flat(target, net.pattern_shapes))
    phi = model.weight.T * (x - baseline)[:, None]
    return Attribution(phi, x, baseline, "local", approximate,
                       {"coalitions_checked": int(checked)})


def _region_tables(cache: ModelCache, bits: np.ndarray):
    """One cache lookup per masked point; returns stacked weights, biases and a point->region index."""
    index: dict[int, int] = {}
    models = []
    region_of = np.empty(bits.shape[0], dtype=np.int64)
    for p, row in enumerate(bits):
        model = cache.get_bits(row)
        r = index.get(id(model))
        if r is None:
            r = index[id(model)] = len(models)
            models.append(model)
        region_of[p] = r
    return np.stack([m.weight for m in models]), np.stack([m.bias for m in models]), region_of


def _marginals(tables, x, baseline, i, s_masks, idx_with, idx_without):
    """Marginal contribution of feature ``i`` to each coalition in ``s_masks``.

    ``idx_with``/``idx_without`` index the masked points ``x^S`` (S and i kept)
    and ``xbar^S`` (S kept).  The sum follows the bias/weight difference form.
    """
    W, B, region_of = tables
    w1, w0 = W[region_of[idx_with]], W[region_of[idx_without]]
    b1, b0 = B[region_of[idx_with]], B[region_of[idx_without]]
    diff = w1 - w0
    in_s = s_masks.astype(np.float64)
    out_s = 1.0 - in_s
    out_s[:, i] = 0.0
    return (
        b1 - b0
        + w1[:, :, i] * x[i] - w0[:, :, i] * baseline[i]
        + np.einsum("cjk,ck->cj", diff, in_s * x)
        + np.einsum("cjk,ck->cj", diff, out_s * baseline)
    )


def shap_global(
    net,
    x,
    baseline,
    max_features: int = DEFAULT_MAX_FEATURES,
    sample: Optional[int] = None,
    seed: int = 0,
) -> Attribution:
    """Shapley values assembled from the local models of every masked point.

    Each distinct activation pattern among the masked points is unwrapped once
    (see ``stats``).  With ``sample=K`` the coalition average is replaced by
    ``K`` seeded random feature orderings and the result is flagged approximate.
    """
    net, x, baseline = _prepare(net, x, baseline)
    n = x.shape[0]
    cache = ModelCache(net)
    if sample is not None:
        return _shap_global_sampled(net, cache, x, baseline, sample, seed)
    _check_cap(n, max_features)
    codes = np.arange(1 << n, dtype=np.int64)
    bits = np.vstack([
        batch_patterns(net, np.where(_coalition_masks(n, codes[s:s + _CHUNK]), x, baseline))
        for s in range(0, 1 << n, _CHUNK)
    ])
    tables = _region_tables(cache, bits)
    weights = shapley_weights(n)
    sizes = np.array([bin(int(c)).count("1") for c in codes])
    phi = np.zeros((n, net.output_dim))
    for i in range(n):
        without = codes[(codes >> i) & 1 == 0]
        for s in range(0, without.size, _CHUNK):
            c = without[s:s + _CHUNK]
            delta = _marginals(tables, x, baseline, i, _coalition_masks(n, c), c | (1 << i), c)
            phi[i] += weights[sizes[c]] @ delta
    stats = cache.stats()
    stats["coalitions"] = int(1 << n)
    return Attribution(phi, x, baseline, "global", stats=stats)


def _shap_global_sampled(net, cache, x, baseline, k, seed):
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(n) for _ in range(k)])
    # chains[p, t] = features kept after the first t steps of permutation p
    chains = np.zeros((k, n + 1, n), dtype=bool)
    for t in range(n):
        chains[:, t + 1] = chains[:, t]
        chains[np.arange(k), t + 1, perms[:, t]] = True
    flat = chains.reshape(-1, n)
    bits = batch_patterns(net, np.where(flat, x, baseline))
    tables = _region_tables(cache, bits)
    phi = np.zeros((n, net.output_dim))
    rows = np.arange(k) * (n + 1)
    for t in range(n):
        for i in range(n):
            sel = np.flatnonzero(perms[:, t] == i)
            if sel.size == 0:
                continue
            delta = _marginals(tables, x, baseline, i, chains[sel, t], rows[sel] + t + 1, rows[sel] + t)
            phi[i] += delta.sum(axis=0)
    phi /= k
    stats = cache.stats()
    stats.update(permutations=int(k), seed=int(seed))
    return Attribution(phi, x, baseline, "global", approximate=True, stats=stats)

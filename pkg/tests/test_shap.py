import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relu_unwrap.generators import random_feedforward, random_gcn
from relu_unwrap.linalg import unvec, vec
from relu_unwrap.networks import FeedforwardNetwork, forward, pattern_of
from relu_unwrap.shap import (
    CoalitionCapExceeded,
    RegionPreconditionError,
    masked_input,
    shap_bruteforce,
    shap_global,
    shap_local,
    shapley_weights,
)


def permutation_shapley(f, x, baseline):
    """Average marginal contribution over all n! orderings."""
    n = len(x)
    phi = 0.0
    for order in itertools.permutations(range(n)):
        kept = set()
        prev = f(masked_input(x, baseline, kept))
        contrib = np.zeros((n,) + np.shape(prev))
        for i in order:
            kept.add(i)
            cur = f(masked_input(x, baseline, kept))
            contrib[i] = cur - prev
            prev = cur
        phi = phi + contrib
    return phi / math.factorial(n)


def symmetric_net():
    return FeedforwardNetwork(((np.eye(2), np.zeros(2)), ([[1.0, 1.0]], [0.0])))


def test_masked_input():
    x, b = np.array([1.0, 2.0, 3.0]), np.zeros(3)
    assert masked_input(x, b, range(3)).tolist() == [1, 2, 3]
    assert masked_input(x, b, []).tolist() == [0, 0, 0]
    assert masked_input(x, b, [0, 2]).tolist() == [1, 0, 3]


def test_weights_sum_to_one_over_coalitions():
    for n in range(1, 10):
        w = shapley_weights(n)
        assert math.isclose(sum(math.comb(n - 1, s) * w[s] for s in range(n)), 1.0, rel_tol=1e-14)


def test_bruteforce_matches_permutation_oracle(rng):
    net = random_feedforward(rng, [4, 5, 3, 2])
    x, b = rng.normal(size=4), rng.normal(size=4)
    expected = permutation_shapley(lambda z: forward(net, z)[0], x, b)
    assert np.max(np.abs(shap_bruteforce(net, x, b).values - expected)) <= 1e-12


def test_linear_net_closed_form(rng):
    w0 = np.abs(rng.normal(size=(3, 3)))
    w1 = rng.normal(size=(1, 3))
    net = FeedforwardNetwork(((w0, np.ones(3)), (w1, [0.5])))
    x, b = np.abs(rng.normal(size=3)), np.abs(rng.normal(size=3))
    w_eff = (w1 @ w0).ravel()
    phi = shap_bruteforce(net, x, b).values[:, 0]
    assert np.allclose(phi, w_eff * (x - b), rtol=1e-12, atol=1e-12)


def test_zero_when_input_is_baseline(rng):
    net = random_feedforward(rng, [3, 4, 2])
    x = rng.normal(size=3)
    for fn in (shap_bruteforce, shap_global, shap_local):
        assert np.array_equal(fn(net, x, x).values, np.zeros((3, 2)))


def test_symmetric_example():
    net = symmetric_net()
    for fn in (shap_bruteforce, shap_global):
        assert np.allclose(fn(net, [1.0, 1.0], [0.0, 0.0]).values, [[1.0], [1.0]], rtol=0, atol=1e-12)


def test_local_fixed_region_example():
    net = FeedforwardNetwork(((np.eye(2), np.ones(2)), ([[3.0, -2.0]], [0.0])))
    a = shap_local(net, [1.0, 1.0], [0.0, 0.0])
    assert a.values.tolist() == [[3.0], [-2.0]]
    assert np.allclose(shap_bruteforce(net, [1.0, 1.0], [0.0, 0.0]).values, a.values, atol=1e-12)


def test_local_precondition_violation():
    with pytest.raises(RegionPreconditionError, match="global"):
        shap_local(symmetric_net(), [1.0, -1.0], [-1.0, 1.0])


def test_global_matches_bruteforce_random(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        net = random_feedforward(rng, [n, 6, 5, 2])
        x, b = rng.normal(size=n), rng.normal(size=n)
        g, bf = shap_global(net, x, b), shap_bruteforce(net, x, b)
        assert np.max(np.abs(g.values - bf.values)) <= 1e-8


def test_cache_counts_distinct_patterns(rng):
    net = random_feedforward(rng, [6, 6, 6, 1])
    x, b = rng.normal(size=6), rng.normal(size=6)
    a = shap_global(net, x, b)
    points = [masked_input(x, b, [k for k in range(6) if s >> k & 1]) for s in range(64)]
    distinct = {pattern_of(net, p) for p in points}
    assert a.stats["unwraps"] == len(distinct)
    assert a.stats["hits"] == 64 - len(distinct)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_efficiency(seed, n):
    g = np.random.default_rng(seed)
    net = random_feedforward(g, [n, 5, 4, 2])
    x, b = g.normal(size=n), g.normal(size=n)
    gap = forward(net, x)[0] - forward(net, b)[0]
    for fn in (shap_global, shap_bruteforce):
        assert np.max(np.abs(fn(net, x, b).values.sum(axis=0) - gap)) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symmetry_property(seed):
    g = np.random.default_rng(seed)
    # features 0 and 1 enter every first-layer neuron with the same weight
    w0 = g.normal(size=(5, 3))
    w0[:, 1] = w0[:, 0]
    net = FeedforwardNetwork(((w0, g.normal(size=5)), (g.normal(size=(2, 5)), g.normal(size=2))))
    v, c = g.normal(), g.normal(size=1)
    x = np.array([v, v, c[0]])
    b = np.array([0.3, 0.3, -0.2])
    phi = shap_global(net, x, b).values
    assert np.max(np.abs(phi[0] - phi[1])) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_null_player(seed, dead):
    g = np.random.default_rng(seed)
    w0 = g.normal(size=(5, 4))
    w0[:, dead] = 0.0
    net = FeedforwardNetwork(((w0, g.normal(size=5)), (g.normal(size=(2, 5)), g.normal(size=2))))
    x, b = g.normal(size=4), g.normal(size=4)
    assert np.max(np.abs(shap_global(net, x, b).values[dead])) <= 1e-12
    assert np.max(np.abs(shap_bruteforce(net, x, b).values[dead])) <= 1e-12


def test_sampled_global(rng):
    net = random_feedforward(rng, [5, 6, 4, 1])
    x, b = rng.normal(size=5), rng.normal(size=5)
    a = shap_global(net, x, b, sample=3000, seed=7)
    assert a.approximate
    gap = forward(net, x)[0] - forward(net, b)[0]
    assert np.max(np.abs(a.values.sum(axis=0) - gap)) <= 1e-10
    exact = shap_global(net, x, b).values
    assert np.max(np.abs(a.values - exact)) <= 0.05 * max(1.0, np.max(np.abs(exact)))
    again = shap_global(net, x, b, sample=3000, seed=7)
    assert np.array_equal(a.values, again.values)


def test_caps(rng):
    net = random_feedforward(rng, [21, 2, 1])
    x, b = rng.normal(size=21), rng.normal(size=21)
    with pytest.raises(CoalitionCapExceeded):
        shap_bruteforce(net, x, b)
    with pytest.raises(CoalitionCapExceeded):
        shap_global(net, x, b)
    assert shap_global(net, x, b, sample=20).approximate


def test_local_beyond_cap_is_flagged(rng):
    w0 = np.abs(rng.normal(size=(3, 22)))
    net = FeedforwardNetwork(((w0, np.ones(3)), (rng.normal(size=(1, 3)), [0.0])))
    a = shap_local(net, np.abs(rng.normal(size=22)), np.zeros(22), check_samples=256)
    assert a.approximate


def test_gcn_attribution_via_flattening(rng):
    net = random_gcn(rng, 2, [2, 3, 1])
    x, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    f = lambda z: vec(forward(net, unvec(z, (2, 2)))[0])
    expected = permutation_shapley(f, vec(x), vec(b))
    assert np.max(np.abs(shap_global(net, x, b).values - expected)) <= 1e-10

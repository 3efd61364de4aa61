import numpy as np
import pytest

from relu_unwrap.generators import random_feedforward
from relu_unwrap.networks import ActivationPattern, FeedforwardNetwork, forward, pattern_of
from relu_unwrap.regions import membership, region_halfspaces
from relu_unwrap.surrogate import (
    LeafBudgetExceeded,
    MrtInternal,
    MrtLeaf,
    build_mrt,
    export_theory,
    mrt_eval,
    parse_theory,
)
from relu_unwrap.unwrap import unwrap_feedforward


def test_single_neuron_tree(single_relu_net):
    tree = build_mrt(single_relu_net, "materialize")
    assert isinstance(tree.root, MrtInternal)
    assert isinstance(tree.root.true_child, MrtLeaf) and isinstance(tree.root.false_child, MrtLeaf)
    assert tree.root.true_child.model.weight.tolist() == [[1.0]]
    assert tree.root.false_child.model.weight.tolist() == [[0.0]]


def test_quadrant_tree(quadrant_net):
    tree = build_mrt(quadrant_net, "materialize")
    assert tree.stats()["leaves"] == 4
    assert sorted(l.model.pattern.bitstring() for l in tree.leaves()) == ["00", "01", "10", "11"]
    for x in ([1, 1], [1, -1], [-1, 1], [-1, -1]):
        assert mrt_eval(tree, x).tolist() == forward(quadrant_net, x)[0].tolist()


def test_random_tree_matches_forward(rng):
    net = random_feedforward(rng, [2, 3, 2])
    tree = build_mrt(net, "materialize")
    lazy = build_mrt(net, "lazy")
    for x in rng.normal(scale=2, size=(1000, 2)):
        f = forward(net, x)[0]
        assert np.allclose(mrt_eval(tree, x), f, rtol=1e-9, atol=1e-9)
        assert np.array_equal(mrt_eval(tree, x), mrt_eval(lazy, x))


def test_boundary_follows_false_branch(single_relu_net):
    tree = build_mrt(single_relu_net, "materialize")
    assert mrt_eval(tree, [0.0]).tolist() == forward(single_relu_net, [0.0])[0].tolist() == [0.0]


def test_leaf_provenance_bit_identical(rng):
    net = random_feedforward(rng, [3, 3, 3, 2])
    for leaf in build_mrt(net, "materialize").leaves():
        ref = unwrap_feedforward(net, leaf.model.pattern)
        assert np.array_equal(leaf.model.weight, ref.weight)
        assert np.array_equal(leaf.model.bias, ref.bias)


def test_inside_region_equals_unwrap(rng):
    net = random_feedforward(rng, [2, 4, 1])
    tree = build_mrt(net, "materialize")
    x = rng.normal(size=2)
    assert np.array_equal(mrt_eval(tree, x), unwrap_feedforward(net, pattern_of(net, x)).evaluate(x))


def test_leaf_budget(rng):
    net = random_feedforward(rng, [2, 7, 6, 1])
    with pytest.raises(LeafBudgetExceeded):
        build_mrt(net, "materialize", max_leaves=4096)
    lazy = build_mrt(net, "lazy")
    x = rng.normal(size=2)
    assert np.allclose(lazy.evaluate(x), forward(net, x)[0], rtol=1e-9, atol=1e-9)


def test_feasibility_flags(quadrant_net):
    # an off neuron in layer 1 kills its path, so some deeper patterns are empty
    net = FeedforwardNetwork(((np.eye(2), np.zeros(2)), ([[1.0, 0.0]], [0.0]), ([[1.0]], [0.0])))
    tree = build_mrt(net, "materialize", feasibility_box=([-1, -1], [1, 1]))
    flags = {l.model.pattern.bitstring(): l.feasible for l in tree.leaves()}
    assert flags["101"] and flags["111"] and flags["000"]
    assert flags["001"] is False and flags["011"] is False


def test_theory_single_neuron(single_relu_net):
    th = export_theory(single_relu_net, [ActivationPattern([[1]]), ActivationPattern([[0]])])
    assert len(th.atoms) == 1
    assert [t.literals for t in th.terms] == [(("h1_1", True),), (("h1_1", False),)]


def test_theory_quadrants(quadrant_net):
    patterns = [ActivationPattern([[a, b]]) for a in (0, 1) for b in (0, 1)]
    th = export_theory(quadrant_net, patterns)
    assert len(th.terms) == 4
    assert all(len(t.literals) == 2 for t in th.terms)
    assert {a.name for a in th.atoms} == {"h1_1", "h1_2"}


def test_theory_roundtrip_membership(rng):
    net = random_feedforward(rng, [2, 3, 3, 1])
    patterns = list({pattern_of(net, x) for x in rng.normal(size=(50, 2))})
    th = export_theory(net, patterns)
    text = th.to_text()
    parsed = parse_theory(text)
    assert parsed.to_text() == text
    # second-layer atoms carry the first-layer prefix
    assert any("@" in a.name for a in parsed.atoms)
    for term, p in zip(parsed.terms, patterns):
        r = region_halfspaces(net, p)
        for y in rng.normal(scale=2, size=(200, 2)):
            assert parsed.term_holds(term, y) == membership(r, y)

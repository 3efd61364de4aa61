"""Exact regression-tree surrogates and propositional theory export.

Tree nodes split on one hidden neuron at a time in layer-major order.  The
condition at a node is the neuron's pre-activation expressed in input space,
which depends on the states already chosen higher up the path.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .linalg import ShapeError
from .networks import ActivationPattern, FeedforwardNetwork
from .regions import HalfSpace, region_halfspaces, region_witness
from .unwrap import LocalLinearModel, unwrap_feedforward

__all__ = [
    "MrtInternal",
    "MrtLeaf",
    "MaterializedMrt",
    "LazyMrt",
    "LeafBudgetExceeded",
    "build_mrt",
    "mrt_eval",
    "Atom",
    "Term",
    "TheoryExport",
    "export_theory",
    "parse_theory",
]


class LeafBudgetExceeded(RuntimeError):
    """Materializing the tree would exceed the leaf budget."""


@dataclass(eq=False)
class MrtLeaf:
    model: LocalLinearModel
    feasible: Optional[bool] = None


@dataclass(eq=False)
class MrtInternal:
    condition: HalfSpace
    true_child: "MrtNode"
    false_child: "MrtNode"


MrtNode = Union[MrtInternal, MrtLeaf]


def _next_map(net, j, bits, map_w, map_b):
    d = np.asarray(bits, dtype=np.float64)
    wn, bn = net.layers[j + 1]
    return wn @ (d[:, None] * map_w), wn @ (d * map_b) + bn


@dataclass(eq=False)
class MaterializedMrt:
    net: FeedforwardNetwork
    root: MrtNode

    def leaves(self) -> list[MrtLeaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, MrtLeaf):
                out.append(node)
            else:
                stack.extend((node.false_child, node.true_child))
        return out

    def stats(self) -> dict:
        leaves = self.leaves()
        return {
            "mode": "materialize",
            "leaves": len(leaves),
            "internal_nodes": len(leaves) - 1,
            "depth": self.net.n_hidden,
            "feasible_leaves": sum(1 for l in leaves if l.feasible),
            "infeasible_leaves": sum(1 for l in leaves if l.feasible is False),
        }

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.net.input_dim,):
            raise ShapeError(f"input shape {x.shape} does not match ({self.net.input_dim},)")
        node = self.root
        while isinstance(node, MrtInternal):
            node = node.true_child if node.condition.contains(x) else node.false_child
        return node.model.evaluate(x)

    def to_dict(self) -> dict:
        def enc(node):
            if isinstance(node, MrtLeaf):
                m = node.model
                return {
                    "pattern": m.pattern.bitstring(),
                    "weight": m.weight.tolist(),
                    "bias": m.bias.tolist(),
                    "feasible": node.feasible,
                }
            c = node.condition
            return {
                "layer": c.layer,
                "neuron": c.neuron,
                "normal": c.normal.tolist(),
                "offset": c.offset,
                "true": enc(node.true_child),
                "false": enc(node.false_child),
            }

        return enc(self.root)


@dataclass(eq=False)
class LazyMrt:
    """Walks the split conditions for one input at a time without building the tree."""

    net: FeedforwardNetwork
    cache: dict = field(default_factory=dict)

    def path(self, x) -> ActivationPattern:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.net.input_dim,):
            raise ShapeError(f"input shape {x.shape} does not match ({self.net.input_dim},)")
        map_w, map_b = self.net.layers[0]
        bits = []
        n_hidden_layers = len(self.net.hidden_sizes)
        for j in range(n_hidden_layers):
            layer_bits = [int(map_w[i] @ x + map_b[i] > 0) for i in range(map_w.shape[0])]
            bits.append(layer_bits)
            if j + 1 < n_hidden_layers:
                map_w, map_b = _next_map(self.net, j, layer_bits, map_w, map_b)
        return ActivationPattern(bits)

    def evaluate(self, x) -> np.ndarray:
        p = self.path(x)
        model = self.cache.get(p)
        if model is None:
            model = self.cache[p] = unwrap_feedforward(self.net, p)
        return model.evaluate(x)

    def stats(self) -> dict:
        return {"mode": "lazy", "depth": self.net.n_hidden, "leaves_visited": len(self.cache),
                "candidate_leaves": 2 ** self.net.n_hidden}


def build_mrt(
    net: FeedforwardNetwork,
    mode: str = "lazy",
    max_leaves: int = 4096,
    feasibility_box: Optional[tuple[Sequence[float], Sequence[float]]] = None,
    eps: float = 1e-7,
):
    """Exact tree surrogate of ``net``.

    ``mode="materialize"`` builds all ``2**n_hidden`` leaves (refused above
    ``max_leaves``); infeasible leaves are kept, and flagged when
    ``feasibility_box=(lo, hi)`` is given.  ``mode="lazy"`` returns an evaluator.
    """
    if mode == "lazy":
        return LazyMrt(net)
    if mode != "materialize":
        raise ValueError(f"unknown mode {mode!r}")
    if 2 ** net.n_hidden > max_leaves:
        raise LeafBudgetExceeded(
            f"{2 ** net.n_hidden} leaves needed for {net.n_hidden} hidden neurons, budget is {max_leaves}"
        )
    sizes = net.hidden_sizes

    def leaf(bits):
        p = ActivationPattern(bits)
        feasible = None
        if feasibility_box is not None:
            feasible = region_witness(net, p, *feasibility_box, eps=eps) is not None
        return MrtLeaf(unwrap_feedforward(net, p), feasible)

    def grow(j, i, map_w, map_b, prefix, current):
        if i == sizes[j]:
            bits = prefix + [current]
            if j + 1 == len(sizes):
                return leaf(bits)
            nw, nb = _next_map(net, j, current, map_w, map_b)
            return grow(j + 1, 0, nw, nb, bits, [])
        cond = HalfSpace(map_w[i].copy(), float(map_b[i]), j, i)
        return MrtInternal(
            cond,
            grow(j, i + 1, map_w, map_b, prefix, current + [1]),
            grow(j, i + 1, map_w, map_b, prefix, current + [0]),
        )

    w0, b0 = net.layers[0]
    return MaterializedMrt(net, grow(0, 0, w0, b0, [], []))


def mrt_eval(tree, x) -> np.ndarray:
    return tree.evaluate(x)


@dataclass(frozen=True, eq=False)
class Atom:
    """Proposition ``normal @ x + offset > 0`` for one neuron under a pattern prefix."""

    name: str
    layer: int
    neuron: int
    prefix: str
    normal: np.ndarray
    offset: float

    def holds(self, x) -> bool:
        return bool(self.normal @ np.asarray(x, dtype=np.float64) + self.offset > 0)


@dataclass(frozen=True)
class Term:
    """Conjunction of literals ``(atom name, positive)`` naming one region."""

    region_id: str
    pattern: str
    literals: tuple


@dataclass
class TheoryExport:
    atoms: list
    terms: list

    def atom(self, name: str) -> Atom:
        return self._index()[name]

    def _index(self) -> dict:
        return {a.name: a for a in self.atoms}

    def term_holds(self, term: Term, x) -> bool:
        """Strict reading: positive literal ``z > 0``, negative literal ``-z > 0``."""
        idx = self._index()
        x = np.asarray(x, dtype=np.float64)
        for name, positive in term.literals:
            a = idx[name]
            z = a.normal @ x + a.offset
            if not (z > 0 if positive else -z > 0):
                return False
        return True

    def to_text(self) -> str:
        lines = ["# relu-unwrap theory v1",
                 "# atom NAME LAYER NEURON PREFIX OFFSET NORMAL...",
                 "# term REGION PATTERN LITERAL... (~ marks negation)"]
        for a in self.atoms:
            coeffs = " ".join(repr(float(c)) for c in a.normal)
            lines.append(f"atom {a.name} {a.layer} {a.neuron} {a.prefix or '-'} {float(a.offset)!r} {coeffs}")
        for t in self.terms:
            lits = " ".join(name if pos else "~" + name for name, pos in t.literals)
            lines.append(f"term {t.region_id} {t.pattern} {lits}")
        return "\n".join(lines) + "\n"


def _atom_name(layer: int, neuron: int, prefix: str) -> str:
    base = f"h{layer + 1}_{neuron + 1}"
    return f"{base}@{prefix}" if prefix else base


def export_theory(net: FeedforwardNetwork, patterns: Sequence[ActivationPattern]) -> TheoryExport:
    """Atoms and region conjunctions for the given patterns.

    Atoms of layer ``l`` are keyed by the states of layers ``< l``, so patterns
    sharing a prefix share atoms.
    """
    if not patterns:
        raise ValueError("at least one pattern is required")
    atoms: dict[str, Atom] = {}
    terms = []
    for k, p in enumerate(patterns):
        if not isinstance(p, ActivationPattern):
            p = ActivationPattern(p)
        region = region_halfspaces(net, p)
        literals = []
        for h in region.halfspaces:
            prefix = "".join(str(int(b)) for layer in p.layers[:h.layer] for b in layer)
            name = _atom_name(h.layer, h.neuron, prefix)
            positive = bool(p.layers[h.layer][h.neuron])
            if name not in atoms:
                sign = 1.0 if positive else -1.0
                atoms[name] = Atom(name, h.layer, h.neuron, prefix, sign * h.normal, sign * h.offset)
            literals.append((name, positive))
        terms.append(Term(f"r{k}", p.bitstring(), tuple(literals)))
    return TheoryExport(list(atoms.values()), terms)


def parse_theory(text: str) -> TheoryExport:
    atoms, terms = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "atom":
            name, layer, neuron, prefix, offset = parts[1:6]
            atoms.append(Atom(name, int(layer), int(neuron), "" if prefix == "-" else prefix,
                              np.array([float(c) for c in parts[6:]]), float(offset)))
        elif parts[0] == "term":
            lits = tuple((l[1:], False) if l.startswith("~") else (l, True) for l in parts[3:])
            terms.append(Term(parts[1], parts[2], lits))
        else:
            raise ValueError(f"line {lineno}: unknown record {parts[0]!r}")
    return TheoryExport(atoms, terms)

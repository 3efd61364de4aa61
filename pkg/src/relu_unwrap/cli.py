"""Command line entry point: ``relu-unwrap <subcommand> ...``.

Exit codes: 0 success, 1 validation or precondition error, 2 internal
invariant violation (including a failed ``verify`` property).  Errors are
written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .io import (
    ModelFileError,
    dumps,
    linear_model_payload,
    load_model,
    make_result,
    pattern_payload,
)
from .linalg import ShapeError, vec
from .networks import ActivationPattern, FeedforwardNetwork, forward
from .regions import EnumerationRefused, enumerate_regions, region_halfspaces
from .shap import CoalitionCapExceeded, RegionPreconditionError, shap_bruteforce, shap_global, shap_local
from .surrogate import LeafBudgetExceeded, build_mrt, export_theory
from .unwrap import unwrap
from .verify import VerifyConfig, run_verification


class InvariantViolation(RuntimeError):
    pass


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags are a validation error (exit 1), reported like every other error
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


USER_ERRORS = (ModelFileError, ShapeError, ValueError, RegionPreconditionError,
               CoalitionCapExceeded, EnumerationRefused, LeafBudgetExceeded)


def parse_array(text: str) -> np.ndarray:
    """A JSON file path, a JSON literal, or comma-separated numbers."""
    if os.path.isfile(text):
        obj = json.loads(Path(text).read_text())
    else:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            obj = [float(t) for t in text.split(",") if t.strip()]
    arr = np.array(obj, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("inputs must be finite")
    return arr


def _bound(text: str, n: int) -> np.ndarray:
    arr = np.atleast_1d(parse_array(text))
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.shape != (n,):
        raise ShapeError(f"box bound has {arr.size} entries, expected 1 or {n}")
    return arr


def _emit(args, doc) -> None:
    text = doc if isinstance(doc, str) else dumps(doc)
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _flat(net, x):
    """Feedforward view of ``net`` and the matching vectorized input."""
    if isinstance(net, FeedforwardNetwork):
        return net, x
    return net.to_feedforward(), vec(x)


def cmd_unwrap(args, net):
    x = parse_array(args.input)
    out, p = forward(net, x)
    model = unwrap(net, p)
    payload = linear_model_payload(model)
    if args.eval:
        payload["network_output"] = vec(out).tolist()
        payload["model_output"] = model.evaluate(x).tolist()
    return make_result("linear_model", payload, net, x)


def cmd_region(args, net):
    x = parse_array(args.input)
    ff, fx = _flat(net, x)
    r = region_halfspaces(ff, forward(ff, fx)[1])
    payload = {
        "pattern": pattern_payload(r.pattern),
        "halfspaces": [
            {"layer": h.layer, "neuron": h.neuron, "normal": h.normal.tolist(),
             "offset": h.offset, "degenerate": h.degenerate}
            for h in r.halfspaces
        ],
    }
    return make_result("region", payload, net, x)


def cmd_tree(args, net):
    ff = net.to_feedforward()
    box = None
    if args.box:
        box = (_bound(args.box[0], ff.input_dim), _bound(args.box[1], ff.input_dim))
    if args.materialize:
        tree = build_mrt(ff, "materialize", max_leaves=args.max_leaves, feasibility_box=box)
        payload = {"stats": tree.stats()}
        if args.full:
            payload["tree"] = tree.to_dict()
    else:
        payload = {"stats": build_mrt(ff, "lazy").stats()}
    return make_result("tree", payload, net)


def cmd_theory(args, net):
    xs = parse_array(args.inputs)
    ff = net.to_feedforward()
    if isinstance(net, FeedforwardNetwork):
        xs = np.atleast_2d(xs)
    else:
        xs = xs.reshape((-1,) + net.input_shape)
    patterns = []
    for x in xs:
        p = forward(ff, vec(x))[1]
        if p not in patterns:
            patterns.append(p)
    return export_theory(ff, patterns).to_text()


def cmd_shap(args, net):
    x = parse_array(args.input)
    b = parse_array(args.baseline)
    if args.mode == "local":
        attr = shap_local(net, x, b, max_features=args.max_features, seed=args.seed)
    elif args.mode == "global":
        attr = shap_global(net, x, b, max_features=args.max_features, sample=args.sample, seed=args.seed)
    else:
        attr = shap_bruteforce(net, x, b, max_features=args.max_features)
    payload = {
        "values": attr.values.tolist(),
        "baseline": attr.baseline.tolist(),
        "mode": attr.mode,
        "approximate": attr.approximate,
        "stats": attr.stats,
    }
    return make_result("attribution", payload, net, x, seed=args.seed)


def cmd_enumerate(args, net):
    ff = net.to_feedforward()
    lo, hi = _bound(args.box[0], ff.input_dim), _bound(args.box[1], ff.input_dim)
    regions = enumerate_regions(ff, lo, hi, strategy=args.strategy, count=args.count,
                                seed=args.seed, eps=args.eps, max_neurons=args.max_neurons)
    payload = {
        "strategy": args.strategy,
        "box": {"lo": lo.tolist(), "hi": hi.tolist()},
        "count": len(regions),
        "regions": [{"pattern": r.pattern.bitstring(), "witness": r.witness.tolist()} for r in regions],
    }
    return make_result("regions", payload, net, seed=args.seed if args.strategy == "sample" else None)


def cmd_verify(args, net):
    cfg = VerifyConfig(samples=args.samples, seed=args.seed, tol=args.tol,
                       shap_tol=args.shap_tol, shap_instances=args.shap_instances)
    report = run_verification(net, cfg)
    doc = make_result("verify_report", report.to_payload(), net, seed=args.seed)
    if not report.passed:
        _emit(args, doc)
        failed = [p.name for p in report.properties if not p.passed]
        raise InvariantViolation(f"properties failed: {', '.join(failed)}")
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relu-unwrap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--model", required=True, help="model file (JSON)")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.set_defaults(func=func)
        return p

    p = add("unwrap", cmd_unwrap, "local linear model at an input")
    p.add_argument("--input", required=True)
    p.add_argument("--eval", action="store_true", help="also report network and model outputs")

    p = add("region", cmd_region, "half-space description of the input's region")
    p.add_argument("--input", required=True)

    p = add("tree", cmd_tree, "regression-tree surrogate")
    p.add_argument("--materialize", action="store_true")
    p.add_argument("--max-leaves", type=int, default=4096)
    p.add_argument("--full", action="store_true", help="serialize the whole tree")
    p.add_argument("--box", nargs=2, metavar=("LO", "HI"), help="flag leaves infeasible in this box")

    p = add("theory", cmd_theory, "propositional theory of the inputs' regions")
    p.add_argument("--inputs", required=True, help="JSON list of inputs or a JSON file")

    p = add("shap", cmd_shap, "Shapley attribution")
    p.add_argument("--input", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--mode", choices=("local", "global", "bruteforce"), default="global")
    p.add_argument("--sample", type=int, help="Monte Carlo orderings (global mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-features", type=int, default=20)

    p = add("enumerate", cmd_enumerate, "activation regions meeting a box")
    p.add_argument("--box", nargs=2, metavar=("LO", "HI"), required=True)
    p.add_argument("--strategy", choices=("sample", "exhaustive"), default="sample")
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-7)
    p.add_argument("--max-neurons", type=int, default=20)

    p = add("verify", cmd_verify, "randomized property suite")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--shap-tol", type=float, default=1e-8)
    p.add_argument("--shap-instances", type=int, default=20)
    return parser


def _error(kind: str, exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _error("usage_error", exc)
        return 1
    try:
        net = load_model(args.model)
        result = args.func(args, net)
    except InvariantViolation as exc:
        _error("invariant_violation", exc)
        return 2
    except USER_ERRORS as exc:
        _error("validation_error", exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        _error("internal_error", exc)
        return 2
    _emit(args, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())

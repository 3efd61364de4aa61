"""Randomized property checks run by ``relu-unwrap verify``."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import vec
from .networks import ActivationPattern, FeedforwardNetwork
from .regions import membership, region_halfspaces
from .shap import shap_bruteforce, shap_global
from .surrogate import build_mrt
from .unwrap import unwrap


@dataclass
class VerifyConfig:
    samples: int = 500
    seed: int = 0
    tol: float = 1e-9
    shap_tol: float = 1e-8
    shap_instances: int = 20
    max_shap_features: int = 12
    max_leaves: int = 4096
    generic_margin: float = 1e-7


@dataclass
class PropertyResult:
    name: str
    passed: bool
    checked: int
    max_error: float = 0.0
    detail: str = ""
    skipped: bool = False


@dataclass
class VerifyReport:
    properties: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def to_payload(self) -> dict:
        return {"passed": self.passed, "properties": [asdict(p) for p in self.properties]}


def rel_error(a, b) -> float:
    """Largest ``|a - b| / max(1, |b|)`` over all entries."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if a.size else 0.0


def check_decomposition(net, xs, tol) -> PropertyResult:
    worst = 0.0
    for x in xs:
        out, p = net.forward(x)
        model = unwrap(net, ActivationPattern(p))
        worst = max(worst, rel_error(model.evaluate(x), vec(out)))
    return PropertyResult("decomposition_equals_forward", worst <= tol, len(xs), worst)


def check_regions(ff: FeedforwardNetwork, xs, ys, margin) -> PropertyResult:
    mismatches = checked = 0
    for x, y in zip(xs, ys):
        zx, zy = ff.preactivations(x), ff.preactivations(y)
        if min(np.min(np.abs(z)) for z in zx + zy) <= margin:
            continue
        px, py = ActivationPattern([z > 0 for z in zx]), ActivationPattern([z > 0 for z in zy])
        r = region_halfspaces(ff, px)
        if not membership(r, x) or membership(r, y) != (px == py):
            mismatches += 1
        checked += 1
    return PropertyResult("region_membership_matches_pattern", mismatches == 0, checked,
                          float(mismatches), f"{mismatches} mismatches")


def check_tree(ff: FeedforwardNetwork, xs, tol, max_leaves) -> list[PropertyResult]:
    out = []
    lazy = build_mrt(ff, "lazy")
    worst = max(rel_error(lazy.evaluate(x), ff.forward(x)[0]) for x in xs)
    out.append(PropertyResult("lazy_tree_equals_forward", worst <= tol, len(xs), worst))
    if 2 ** ff.n_hidden <= max_leaves:
        tree = build_mrt(ff, "materialize", max_leaves=max_leaves)
        worst = max(rel_error(tree.evaluate(x), ff.forward(x)[0]) for x in xs)
        out.append(PropertyResult("materialized_tree_equals_forward", worst <= tol, len(xs), worst))
    else:
        out.append(PropertyResult("materialized_tree_equals_forward", True, 0, detail=(
            f"skipped: {2 ** ff.n_hidden} leaves exceeds budget {max_leaves}"), skipped=True))
    return out


def check_shap(ff: FeedforwardNetwork, xs, bs, tol, max_features) -> list[PropertyResult]:
    if ff.input_dim > max_features:
        msg = f"skipped: {ff.input_dim} features exceeds {max_features}"
        return [PropertyResult("shap_global_equals_bruteforce", True, 0, detail=msg, skipped=True),
                PropertyResult("shap_efficiency", True, 0, detail=msg, skipped=True)]
    worst = worst_eff = 0.0
    for x, b in zip(xs, bs):
        g = shap_global(ff, x, b, max_features=max_features)
        bf = shap_bruteforce(ff, x, b, max_features=max_features)
        worst = max(worst, float(np.max(np.abs(g.values - bf.values))))
        gap = g.values.sum(axis=0) - (ff.forward(x)[0] - ff.forward(b)[0])
        worst_eff = max(worst_eff, float(np.max(np.abs(gap))))
    return [PropertyResult("shap_global_equals_bruteforce", worst <= tol, len(xs), worst),
            PropertyResult("shap_efficiency", worst_eff <= tol, len(xs), worst_eff)]


def run_verification(net, cfg: VerifyConfig | None = None) -> VerifyReport:
    cfg = cfg or VerifyConfig()
    rng = np.random.default_rng(cfg.seed)
    ff = net.to_feedforward()
    shape = ff.input_shape if isinstance(net, FeedforwardNetwork) else net.input_shape
    xs = rng.normal(size=(cfg.samples,) + tuple(shape))
    flat = np.array([vec(x) for x in xs])
    ys = rng.normal(size=flat.shape)
    report = VerifyReport()
    report.properties.append(check_decomposition(net, xs, cfg.tol))
    report.properties.append(check_regions(ff, flat, ys, cfg.generic_margin))
    report.properties.extend(check_tree(ff, flat, cfg.tol, cfg.max_leaves))
    k = min(cfg.shap_instances, cfg.samples)
    report.properties.extend(check_shap(ff, flat[:k], ys[:k], cfg.shap_tol, cfg.max_shap_features))
    return report

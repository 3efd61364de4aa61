"""Model and result file formats.

Model file (JSON)::

    {
      "format_version": "1.0",
      "family": "feedforward" | "gcn" | "tensor",
      "layers": [...],
      "metadata": {...}
    }

Every array is ``{"shape": [...], "data": <nested row-major lists>}``.  Layer
records per family:

* feedforward: ``{"weight": (n_out, n_in), "bias": (n_out,)}``
* gcn: ``{"operator": (k, k), "weight": (n_in, n_out), "bias": (k, n_out)}``
* tensor: ``{"mode_mats": [(a_i, a_i'), ...], "bias": (a_1', ..., a_k')}``

The last layer of every family is an affine readout without ReLU.

Result file (JSON)::

    {"kind": ..., "payload": {...}, "provenance": {"model_hash", "input", "seed", "tool_version"}}

Floats are written with Python's shortest round-trip representation and keys
are sorted, so identical invocations produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .linalg import ShapeError
from .networks import ActivationPattern, FeedforwardNetwork, GcnNetwork, TensorNetwork
from .unwrap import LocalLinearModel

FORMAT_VERSION = "1.0"
SUPPORTED_VERSIONS = {"1.0"}
FAMILIES = ("feedforward", "gcn", "tensor")
RESULT_KINDS = ("linear_model", "region", "tree", "theory", "attribution", "verify_report", "regions")


class ModelFileError(ValueError):
    pass


class ModelParseError(ModelFileError):
    pass


class ModelShapeError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


def encode_array(a) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.tolist()}


def decode_array(obj, path: str) -> np.ndarray:
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise ModelParseError(f"{path}: expected an object with 'shape' and 'data'")
    shape = obj["shape"]
    if not isinstance(shape, list) or not all(isinstance(d, int) and d >= 1 for d in shape):
        raise ModelParseError(f"{path}.shape: expected a list of positive integers, got {shape!r}")
    try:
        arr = np.array(obj["data"], dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise ModelParseError(f"{path}.data: not a rectangular numeric array ({exc})") from None
    if arr.shape != tuple(shape):
        raise ModelShapeError(f"{path}: declared shape {tuple(shape)} but data has shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelParseError(f"{path}: NaN/Inf entries are not allowed")
    return arr


def _field(layer: dict, key: str, path: str):
    if not isinstance(layer, dict) or key not in layer:
        raise ModelParseError(f"{path}: missing field '{key}'")
    return layer[key]


def model_from_dict(doc: Any):
    if not isinstance(doc, dict):
        raise ModelParseError("model file must contain a JSON object")
    version = doc.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise ModelVersionError(
            f"format_version {version!r} is not supported (expected one of {sorted(SUPPORTED_VERSIONS)})"
        )
    family = doc.get("family")
    if family not in FAMILIES:
        raise ModelParseError(f"family: expected one of {FAMILIES}, got {family!r}")
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise ModelParseError("layers: expected a non-empty list")
    parsed = []
    for l, layer in enumerate(layers):
        p = f"layers[{l}]"
        if family == "feedforward":
            parsed.append((decode_array(_field(layer, "weight", p), p + ".weight"),
                           decode_array(_field(layer, "bias", p), p + ".bias")))
        elif family == "gcn":
            parsed.append((decode_array(_field(layer, "operator", p), p + ".operator"),
                           decode_array(_field(layer, "weight", p), p + ".weight"),
                           decode_array(_field(layer, "bias", p), p + ".bias")))
        else:
            mats = _field(layer, "mode_mats", p)
            if not isinstance(mats, list):
                raise ModelParseError(f"{p}.mode_mats: expected a list")
            parsed.append(([decode_array(m, f"{p}.mode_mats[{i}]") for i, m in enumerate(mats)],
                           decode_array(_field(layer, "bias", p), p + ".bias")))
    cls = {"feedforward": FeedforwardNetwork, "gcn": GcnNetwork, "tensor": TensorNetwork}[family]
    try:
        return cls(tuple(parsed))
    except ShapeError as exc:
        raise ModelShapeError(str(exc)) from None


def model_to_dict(net, metadata: dict | None = None) -> dict:
    if isinstance(net, FeedforwardNetwork):
        family = "feedforward"
        layers = [{"weight": encode_array(w), "bias": encode_array(b)} for w, b in net.layers]
    elif isinstance(net, GcnNetwork):
        family = "gcn"
        layers = [{"operator": encode_array(a), "weight": encode_array(w), "bias": encode_array(b)}
                  for a, w, b in net.layers]
    elif isinstance(net, TensorNetwork):
        family = "tensor"
        layers = [{"mode_mats": [encode_array(m) for m in mats], "bias": encode_array(b)}
                  for mats, b in net.layers]
    else:
        raise TypeError(f"cannot serialize {type(net).__name__}")
    return {"format_version": FORMAT_VERSION, "family": family, "layers": layers,
            "metadata": dict(metadata or {})}


def loads_model(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"invalid JSON: {exc}") from None
    return model_from_dict(doc)


def load_model(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelParseError(f"cannot read {path}: {exc.strerror}") from None
    return loads_model(text)


def save_model(net, path, metadata: dict | None = None) -> None:
    Path(path).write_text(dumps(model_to_dict(net, metadata)))


def model_hash(net) -> str:
    doc = model_to_dict(net)
    doc.pop("metadata")
    return hashlib.sha256(dumps(doc).encode()).hexdigest()


def bundled_model_path(name: str = "ff_3_4_4_2") -> Path:
    return Path(str(resources.files("relu_unwrap") / "data" / f"{name}.json"))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def make_result(kind: str, payload: dict, net=None, input=None, seed=None) -> dict:
    if kind not in RESULT_KINDS:
        raise ValueError(f"unknown result kind {kind!r}")
    provenance = {
        "model_hash": model_hash(net) if net is not None else None,
        "input": None if input is None else np.asarray(input, dtype=np.float64).tolist(),
        "seed": seed,
        "tool_version": __version__,
    }
    return {"kind": kind, "payload": payload, "provenance": provenance}


def loads_result(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("kind") not in RESULT_KINDS:
        raise ValueError(f"unknown result kind {doc.get('kind')!r}")
    return doc


def pattern_payload(p: ActivationPattern) -> list:
    return [a.tolist() for a in p.layers]


def linear_model_payload(m: LocalLinearModel) -> dict:
    return {
        "weight": m.weight.tolist(),
        "bias": m.bias.tolist(),
        "pattern": pattern_payload(m.pattern),
        "input_shape": list(m.input_shape),
        "output_shape": list(m.output_shape),
    }


def linear_model_from_payload(payload: dict) -> LocalLinearModel:
    return LocalLinearModel(
        np.array(payload["weight"], dtype=np.float64).reshape(-1, int(np.prod(payload["input_shape"]))),
        np.array(payload["bias"], dtype=np.float64),
        ActivationPattern(payload["pattern"]),
        tuple(payload["input_shape"]),
        tuple(payload["output_shape"]),
    )

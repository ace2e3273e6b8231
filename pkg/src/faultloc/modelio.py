"""Versioned binary model files.

Layout (all integers little-endian)::

    8 bytes   magic  b"FLTLOCNN"
    uint32    format version (currently 1)
    uint32    header length H
    H bytes   UTF-8 JSON header: architecture + parameter names/shapes
    ...       parameters, flattened in header order, float64 little-endian
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .cnn import ArchitectureSpec, ConvLayer, MLPSpec, Model
from .errors import ContractError, ModelFormatError

MAGIC = b"FLTLOCNN"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def spec_to_dict(spec) -> dict:
    if spec.kind == "cnn":
        return {"kind": "cnn", "input_length": spec.input_length, "num_classes": spec.num_classes,
                "fc_width": spec.fc_width,
                "conv_layers": [[c.channels, c.kernel, c.pool, c.pool_stride] for c in spec.conv_layers]}
    return {"kind": "nn", "input_length": spec.input_length, "num_classes": spec.num_classes,
            "hidden": list(spec.hidden)}


def spec_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "cnn":
        return ArchitectureSpec(int(d["input_length"]),
                                tuple(ConvLayer(*map(int, c)) for c in d["conv_layers"]),
                                int(d["num_classes"]), d.get("fc_width"))
    if kind == "nn":
        return MLPSpec(int(d["input_length"]), int(d["num_classes"]), tuple(d["hidden"]))
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model: Model, path) -> Path:
    path = Path(path)
    header = {
        "spec": spec_to_dict(model.spec),
        "params": [{"name": nm, "shape": list(p.shape)}
                   for nm, p in zip(model.spec.param_names, model.params)],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(_PREFIX.pack(MAGIC, VERSION, len(hbytes)) + hbytes + body)
    tmp.replace(path)
    return path


def load_model(path) -> Model:
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise ModelFormatError("truncated model file (no header)")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic bytes)")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    end = _PREFIX.size + hlen
    if len(raw) < end:
        raise ModelFormatError("truncated model file (header)")
    try:
        header = json.loads(raw[_PREFIX.size:end].decode("utf-8"))
        spec = spec_from_dict(header["spec"])
        entries = header["params"]
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"bad model header: {exc}") from None
    shapes = [tuple(e["shape"]) for e in entries]
    if shapes != [tuple(s) for s in spec.param_shapes()]:
        raise ModelFormatError("parameter shapes disagree with the architecture")
    total = sum(int(np.prod(s)) for s in shapes)
    if len(raw) - end != 8 * total:
        raise ModelFormatError(f"expected {8 * total} parameter bytes, found {len(raw) - end}")
    flat = np.frombuffer(raw, dtype="<f8", offset=end).astype(float)
    params, pos = [], 0
    for s in shapes:
        k = int(np.prod(s))
        params.append(flat[pos:pos + k].reshape(s).copy())
        pos += k
    try:
        return Model(spec, tuple(params))
    except ContractError as exc:
        raise ModelFormatError(str(exc)) from None

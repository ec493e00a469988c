"""JSON checkpoints: name -> {shape, little-endian fp64 buffer as base64}."""
from __future__ import annotations

import base64
import json

import numpy as np

FORMAT_VERSION = "tgrev-ckpt/1"


class CheckpointError(ValueError):
    pass


def dumps(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    body = {}
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        body[name] = {"dtype": "<f8", "shape": list(arr.shape),
                      "data": base64.b64encode(arr.tobytes()).decode("ascii")}
    doc = {"version": FORMAT_VERSION, "meta": meta or {}, "tensors": body}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    try:
        doc = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"not a checkpoint: {exc}") from None
    if doc.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    out = {}
    for name, rec in doc["tensors"].items():
        if rec.get("dtype") != "<f8":
            raise CheckpointError(f"{name}: unsupported dtype {rec.get('dtype')}")
        raw = base64.b64decode(rec["data"])
        out[name] = np.frombuffer(raw, dtype="<f8").reshape(rec["shape"]).astype(np.float64)
    return out, doc.get("meta", {})


def save(path, tensors, meta=None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(tensors, meta))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())

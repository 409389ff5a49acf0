"""Named-tensor checkpoints.

JSON with a schema version; tensor payloads are base64 of the raw
little-endian float64 buffer, so save -> load round-trips bitwise.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .tensor import Tensor

SCHEMA_VERSION = "1"


class CheckpointError(ValueError):
    pass


def _encode(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode(entry: dict, name: str) -> Tensor:
    try:
        shape = tuple(int(s) for s in entry["shape"])
        raw = base64.b64decode(entry["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed tensor entry {name!r}: {exc}") from exc
    arr = np.frombuffer(raw, dtype="<f8")
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise CheckpointError(f"tensor {name!r}: payload has {arr.size} values, shape {shape} needs {expected}")
    return arr.reshape(shape).astype(np.float64)


def save_tensors(path, tensors: dict[str, Tensor], extra: dict | None = None) -> None:
    """Write a named-tensor map (plus an optional JSON-able ``extra`` block)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "extra": extra or {},
        "tensors": {name: _encode(np.asarray(t)) for name, t in sorted(tensors.items())},
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_tensors(path) -> tuple[dict[str, Tensor], dict]:
    """Read a checkpoint back as (tensors, extra). Rejects unknown schemas."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON: {exc}") from exc
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CheckpointError(f"{path}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION!r})")
    tensors = {name: _decode(entry, name) for name, entry in doc.get("tensors", {}).items()}
    return tensors, doc.get("extra", {})

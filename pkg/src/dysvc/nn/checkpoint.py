"""Checkpoints: one flat float32 blob plus a JSON sidecar with names, shapes and offsets."""
from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(path, state: "OrderedDict[str, np.ndarray]", iteration: int, config: dict, extra: dict | None = None):
    """Write ``<path>.bin`` and ``<path>.json``; returns the blob path."""
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name, arr in state.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        chunks.append(arr.tobytes())
        offset += arr.size
    blob = path.with_suffix(".bin")
    blob.write_bytes(b"".join(chunks))
    meta = {
        "format": "float32-le",
        "iteration": iteration,
        "config_hash": config_hash(config),
        "config": config,
        "params": entries,
    }
    if extra:
        meta["extra"] = extra
    path.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True, default=str))
    return blob


def load_checkpoint(path) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    flat = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f4")
    state = OrderedDict()
    for e in meta["params"]:
        state[e["name"]] = flat[e["offset"] : e["offset"] + e["count"]].reshape(e["shape"]).astype(np.float32)
    return state, meta

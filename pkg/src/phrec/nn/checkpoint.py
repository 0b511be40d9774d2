"""Flat float64 parameter dumps with a JSON shape manifest."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .tensor import Parameter


def _paths(path: str | Path) -> tuple[Path, Path]:
    # append rather than replace suffixes: stems like "textcnn.word" carry dots
    path = Path(path)
    if path.suffix in (".json", ".bin"):
        path = path.with_suffix("")
    return path.with_name(path.name + ".bin"), path.with_name(path.name + ".json")


def save_checkpoint(path: str | Path, named: Iterable[tuple[str, np.ndarray | Parameter]], meta: dict | None = None) -> Path:
    """Write ``<path>.bin`` and ``<path>.json``; returns the manifest path."""
    bin_path, man_path = _paths(path)
    entries, offset, chunks = [], 0, []
    for name, arr in named:
        val = arr.value if isinstance(arr, Parameter) else np.asarray(arr)
        val = np.ascontiguousarray(val, dtype="<f8")
        entries.append({"name": name, "shape": list(val.shape), "offset": offset})
        offset += val.size
        chunks.append(val.reshape(-1))
    flat = np.concatenate(chunks) if chunks else np.zeros(0, dtype="<f8")
    bin_path.write_bytes(flat.tobytes())
    manifest = {"format": "f8-le", "binary": bin_path.name, "params": entries, "meta": meta or {}}
    man_path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return man_path


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    bin_path, man_path = _paths(path)
    manifest = json.loads(man_path.read_text(encoding="utf-8"))
    flat = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    out = {}
    for e in manifest["params"]:
        size = int(np.prod(e["shape"], dtype=np.int64))
        out[e["name"]] = flat[e["offset"] : e["offset"] + size].reshape(e["shape"]).astype(np.float64)
    return out, manifest.get("meta", {})

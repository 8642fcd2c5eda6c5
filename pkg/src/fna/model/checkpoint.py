"""Structured-text checkpoints: config, config hash and every parameter."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder import EncoderSpec

FORMAT_VERSION = 1


def dump_checkpoint(spec: EncoderSpec, params: dict, cfg_hash: str) -> str:
    tensors = {
        k: {"dtype": str(v.dtype), "shape": list(v.shape),
            "values": [float(x) for x in v.ravel()]}
        for k, v in sorted(params.items())
    }
    doc = {"format": FORMAT_VERSION, "config_hash": cfg_hash, "spec": spec.to_dict(),
           "params": tensors}
    # repr-based float output round-trips float64 exactly
    return json.dumps(doc, sort_keys=True) + "\n"


def load_checkpoint(path):
    """(spec, params, config_hash) from a file written by dump_checkpoint."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    spec = EncoderSpec(**doc["spec"])
    params = {
        k: np.asarray(t["values"], dtype=t["dtype"]).reshape(t["shape"])
        for k, t in doc["params"].items()
    }
    return spec, params, doc["config_hash"]

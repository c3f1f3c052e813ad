"""Checkpoint file format.

Layout: 8-byte magic "TSPFCN01", 4-byte little-endian length of the UTF-8
JSON-encoded architecture config, the JSON bytes, then every parameter blob
in declared layer order as little-endian 32-bit floats.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .model import ArchConfig, FcnModel, param_specs

MAGIC = b"TSPFCN01"


def save_checkpoint(model: FcnModel, path: str | Path) -> None:
    cfg_bytes = json.dumps(model.config.to_json(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(cfg_bytes)))
        fh.write(cfg_bytes)
        for name, _ in param_specs(model.config):
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> FcnModel:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        header = fh.read(4)
        if len(header) != 4:
            raise CheckpointError("truncated checkpoint: missing config length")
        (cfg_len,) = struct.unpack("<I", header)
        cfg_bytes = fh.read(cfg_len)
        if len(cfg_bytes) != cfg_len:
            raise CheckpointError("truncated checkpoint: incomplete config")
        try:
            cfg = ArchConfig.from_json(json.loads(cfg_bytes.decode("utf-8")))
        except (ValueError, KeyError) as exc:
            raise CheckpointError(f"bad config block: {exc}") from exc
        params: dict[str, np.ndarray] = {}
        for name, shape in param_specs(cfg):
            count = int(np.prod(shape))
            blob = fh.read(4 * count)
            if len(blob) != 4 * count:
                raise CheckpointError(f"truncated checkpoint: parameter {name}")
            params[name] = np.frombuffer(blob, dtype="<f4").reshape(shape).astype(np.float32)
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("checkpoint has trailing bytes")
    return FcnModel(config=cfg, params=params)

"""Self-describing encoder checkpoint files.

A checkpoint is a magic line, a JSON header, then the raw tensor payload:
the header lists encoder params, every weight tensor (name and shape, in
payload order, row-major float32 little-endian), the rng states, and a hash
of the config that produced the run. Writing is byte-deterministic for a
given encoder state, so identical runs produce identical files.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .encoder import EncoderParams, MotionEncoder

MAGIC = b"motioncurator-checkpoint v1\n"


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def rng_snapshot(rng: np.random.Generator | None = None) -> dict[str, Any]:
    snap: dict[str, Any] = {
        "torch": base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode()
    }
    if rng is not None:
        snap["numpy"] = rng.bit_generator.state
    return snap


def save_checkpoint(
    path: str | Path,
    encoder: MotionEncoder,
    config: dict | None = None,
    rng_state: dict | None = None,
    meta: dict | None = None,
) -> None:
    tensors = []
    payload = bytearray()
    for name, tensor in encoder.state_dict().items():
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype="<f4")
        tensors.append({"name": name, "shape": list(arr.shape)})
        payload += arr.tobytes()
    header = {
        "params": encoder.params.to_dict(),
        "tensors": tensors,
        "config_hash": config_hash(config or {}),
        "rng": rng_state or {},
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(blob)
        fh.write(b"\n")
        fh.write(bytes(payload))


def load_checkpoint(path: str | Path) -> tuple[MotionEncoder, dict]:
    """Rebuild the encoder from a checkpoint; returns (encoder, header)."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    encoder = MotionEncoder(EncoderParams(**header["params"]))
    state = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[entry["name"]] = torch.from_numpy(arr.copy())
        offset += count * 4
    if offset != len(payload):
        raise ValueError(f"{path}: payload size mismatch")
    encoder.load_state_dict(state)
    encoder.eval()
    return encoder, header

"""Checkpoint container: magic APGCKPT1, embedded JSON, named float32 tensors.

Layout (all little-endian):
    8s   magic  b"APGCKPT1"
    u32  format version (1)
    u32  JSON length, then UTF-8 JSON payload
    u32  tensor count
    per tensor:
        u16  name length, then UTF-8 name
        u8   dtype code (0 = float32)
        u8   rank
        u32  dims[rank]
        raw float32 data
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"APGCKPT1"
FORMAT_VERSION = 1
_DTYPE_F32 = 0


def save_checkpoint(path, payload: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write a checkpoint; `payload` is arbitrary JSON metadata (config, step)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", _DTYPE_F32, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (jlen,) = struct.unpack("<I", fh.read(4))
        payload = json.loads(fh.read(jlen).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            dtype, rank = struct.unpack("<BB", fh.read(2))
            if dtype != _DTYPE_F32:
                raise ValueError(f"{path}: tensor {name}: unknown dtype code {dtype}")
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            size = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(fh.read(4 * size), dtype="<f4")
            if data.size != size:
                raise ValueError(f"{path}: tensor {name}: truncated payload")
            tensors[name] = data.reshape(dims).copy()
    return payload, tensors

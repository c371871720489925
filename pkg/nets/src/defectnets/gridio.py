"""Reader/writer for the toolkit's binary float grid container and manifest.

The container is little-endian: magic "F32G", u32 version (1), u32 ndim,
ndim x u64 dims, then row-major float32 payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np


def read_grid(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != b"F32G":
        raise ValueError(f"{path}: not an F32G grid")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != 1:
        raise ValueError(f"{path}: unsupported grid version {version}")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 12)
    offset = 12 + 8 * ndim
    data = np.frombuffer(raw, dtype="<f4", offset=offset)
    if data.size != int(np.prod(dims)):
        raise ValueError(f"{path}: payload size mismatch")
    return data.reshape(dims).copy()


def write_grid(path: str | Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = b"F32G" + struct.pack("<II", 1, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def read_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "samples" not in doc:
        raise ValueError(f"{path}: not a dataset manifest")
    return doc

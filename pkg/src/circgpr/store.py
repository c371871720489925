"""Deterministic on-disk formats: binary float grids, JSON manifests, PGM images.

Grid container layout (all little-endian):

    bytes 0..3    magic b"F32G"
    bytes 4..7    version, u32 (currently 1)
    bytes 8..11   ndim, u32
    then          ndim x u64 dimensions
    then          row-major float32 payload (4 * prod(dims) bytes)

Round-trips are bit-exact; writing the same data twice yields identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"F32G"
VERSION = 1

MANIFEST_SCHEMA_VERSION = 1


def write_grid(path: str | Path, array: np.ndarray) -> None:
    """Write ``array`` to ``path`` in the F32G container (float32, row-major)."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_grid(path: str | Path) -> np.ndarray:
    """Read an F32G grid. Raises FormatError naming the byte offset on damage."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes, need 12)")
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0: {raw[:4]!r}")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    dims_end = 12 + 8 * ndim
    if len(raw) < dims_end:
        raise FormatError(f"{path}: truncated dims at offset 12")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 12)
    n_payload = 4 * int(np.prod(dims)) if ndim else 4
    if len(raw) != dims_end + n_payload:
        raise FormatError(
            f"{path}: payload length {len(raw) - dims_end} at offset {dims_end}, "
            f"expected {n_payload}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=dims_end)
    return data.reshape(dims).copy()


def export_pgm(img: np.ndarray, path: str | Path) -> None:
    """Write a 2-D array as binary PGM (P5), min-max scaled to 0..255.

    Constant images map to mid-gray 128. Array convention is [ix, iy] with y
    increasing upward; the PGM raster is written top row first.
    """
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise FormatError(f"PGM export needs a 2-D array, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise FormatError("PGM export needs finite values")
    lo, hi = float(a.min()), float(a.max())
    if hi > lo:
        scaled = np.round((a - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.full_like(a, 128.0)
    # raster rows run top-to-bottom: row 0 = max y
    raster = scaled.T[::-1, :].astype(np.uint8)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------

def write_manifest(path: str | Path, samples: list[dict]) -> None:
    """Write the dataset manifest with stable key order (UTF-8 JSON)."""
    doc = {"schema_version": MANIFEST_SCHEMA_VERSION, "samples": samples}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported manifest schema_version")
    if "samples" not in doc:
        raise FormatError(f"{path}: missing 'samples'")
    return doc


def validate_manifest(path: str | Path) -> dict:
    """Full validation: unique ids, referenced files exist, grid dims agree.

    Returns the parsed manifest on success.
    """
    path = Path(path)
    doc = read_manifest(path)
    root = path.parent
    seen: set[str] = set()
    for sample in doc["samples"]:
        sid = sample["id"]
        if sid in seen:
            raise FormatError(f"{path}: duplicate sample id {sid!r}")
        seen.add(sid)
        for key, rel in sample["files"].items():
            fpath = root / rel
            if not fpath.exists():
                raise FormatError(f"{path}: sample {sid}: missing file {rel}")
            declared = sample.get("shapes", {}).get(key)
            if declared is not None and fpath.suffix == ".f32grid":
                grid = read_grid(fpath)
                if list(grid.shape) != list(declared):
                    raise FormatError(
                        f"{path}: sample {sid}: {rel} dims {list(grid.shape)} "
                        f"disagree with declared {declared}"
                    )
    return doc

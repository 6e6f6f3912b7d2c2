"""Feature-grid serialization in the collation engine's on-disk format.

A grid file is a 24-byte header (magic "FMAP", version, H, W, C as
little-endian u32, four reserved zero bytes) followed by H*W*C little-endian
float32 values in row-major order.  Written independently here so the
extractor stays decoupled from the engine package; the format is the contract.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FMAP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


class GridFormatError(Exception):
    pass


def write_grid(values: np.ndarray, path: Path | str) -> None:
    """Write one (H, W, C) float grid; rejects bad ranks and non-finite values."""
    arr = np.asarray(values)
    if arr.ndim != 3:
        raise GridFormatError(f"grid must be 3-d (H, W, C), got shape {arr.shape}")
    height, width, channels = arr.shape
    if min(height, width, channels) < 1:
        raise GridFormatError(f"grid dimensions must be positive, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise GridFormatError("grid contains non-finite values")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, height, width, channels, 0))
        fh.write(payload.tobytes())


def read_grid(path: Path | str) -> np.ndarray:
    """Read a grid back as float32 (H, W, C); used for round-trip checks."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise GridFormatError(f"{path}: truncated header")
        magic, version, height, width, channels, _ = _HEADER.unpack(header)
        if magic != MAGIC:
            raise GridFormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise GridFormatError(f"{path}: unsupported version {version}")
        count = height * width * channels
        payload = fh.read(4 * count)
    if len(payload) < 4 * count:
        raise GridFormatError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f4").reshape(height, width, channels).copy()

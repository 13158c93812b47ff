"""SMAP v1 writer: the binary map format the benchmark harness consumes.

Layout, little-endian:
    magic "SMAP" | version u16 = 1 | height u32 | width u32 | flags u8 | f32 payload
flags bit 0 marks a postprocessed ([0,1] min-max scaled) map.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SMAP"
VERSION = 1
_HEADER = struct.Struct("<4sHIIB")
FLAG_POSTPROCESSED = 0x01


def postprocess(raw: np.ndarray) -> np.ndarray:
    """Clamp negative relevance, then min-max scale to [0,1] (constant maps go to zero)."""
    arr = np.maximum(np.asarray(raw, dtype=np.float32), np.float32(0.0))
    if not np.isfinite(arr).all():
        raise ValueError("relevance map contains NaN or Inf")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - np.float32(lo)) / np.float32(hi - lo)


def encode(data: np.ndarray, postprocessed: bool = True) -> bytes:
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"map must be a non-empty 2-D grid, got shape {arr.shape}")
    flags = FLAG_POSTPROCESSED if postprocessed else 0
    return _HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], flags) + arr.tobytes()


def write(data: np.ndarray, path, postprocessed: bool = True) -> None:
    Path(path).write_bytes(encode(data, postprocessed))

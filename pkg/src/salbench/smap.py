"""Binary saliency-map file format (SMAP v1), the cross-tool interchange surface.

Layout, little-endian:
    magic "SMAP" | version u16 = 1 | height u32 | width u32 | flags u8 | f32 payload
flags bit 0 marks a postprocessed map; the payload is row-major float32.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import SaliencyMap
from .errors import FormatError, InvalidStateError

MAGIC = b"SMAP"
VERSION = 1
_HEADER = struct.Struct("<4sHIIB")
_FLAG_POSTPROCESSED = 0x01


def smap_bytes(smap: SaliencyMap) -> bytes:
    if not smap.postprocessed:
        raise InvalidStateError("only postprocessed maps are saved")
    header = _HEADER.pack(MAGIC, VERSION, smap.height, smap.width, _FLAG_POSTPROCESSED)
    return header + np.ascontiguousarray(smap.data, dtype="<f4").tobytes()


def save_smap(smap: SaliencyMap, path) -> None:
    Path(path).write_bytes(smap_bytes(smap))


def smap_from_bytes(raw: bytes) -> SaliencyMap:
    if len(raw) < _HEADER.size:
        raise FormatError(f"file too short for a map header ({len(raw)} bytes)")
    magic, version, height, width, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic bytes {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported map format version {version}")
    if height < 1 or width < 1:
        raise FormatError(f"bad map dims {height}x{width}")
    body = raw[_HEADER.size :]
    expected = height * width * 4
    if len(body) != expected:
        raise FormatError(f"map payload is {len(body)} bytes, expected {expected}")
    data = np.frombuffer(body, dtype="<f4").reshape(height, width)
    return SaliencyMap(data, postprocessed=bool(flags & _FLAG_POSTPROCESSED))


def load_smap(path) -> SaliencyMap:
    return smap_from_bytes(Path(path).read_bytes())

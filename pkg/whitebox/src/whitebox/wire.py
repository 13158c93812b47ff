"""Server-side implementation of the scorer wire protocol.

Frame layout, little-endian:
    magic "SJSC" | version u16 = 1 | opcode u16 | seq u64 | payload_len u64 | payload
Opcodes: 0 echo, 1 score, 2 capabilities, 3 error response (UTF-8 message).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"SJSC"
VERSION = 1
OP_ECHO = 0
OP_SCORE = 1
OP_CAPABILITIES = 2
OP_ERROR = 3

HEADER = struct.Struct("<4sHHQQ")
_SCORE_REQ_HEAD = struct.Struct("<IIIIB")
_SCORE_RESP_HEAD = struct.Struct("<II")
_MAX_PAYLOAD = 1 << 32

SPACE_RAW01 = 0
SPACE_NORMALIZED = 1


class WireError(Exception):
    """Malformed or incompatible frame."""


class Disconnect(Exception):
    """Peer closed the stream."""


@dataclass(frozen=True)
class Frame:
    opcode: int
    seq: int
    payload: bytes


def encode_frame(frame: Frame) -> bytes:
    return HEADER.pack(MAGIC, VERSION, frame.opcode, frame.seq, len(frame.payload)) + frame.payload


def read_frame(read_exact) -> Frame:
    magic, version, opcode, seq, payload_len = HEADER.unpack(read_exact(HEADER.size))
    if magic != MAGIC:
        raise WireError(f"bad magic bytes {magic!r}")
    if version != VERSION:
        raise WireError(f"unsupported protocol version {version}")
    if payload_len > _MAX_PAYLOAD:
        raise WireError(f"payload length {payload_len} exceeds limit")
    payload = read_exact(payload_len) if payload_len else b""
    return Frame(opcode, seq, payload)


def decode_score_request(payload: bytes):
    """Returns ((n, H, W, C) float32 stack, space code)."""
    if len(payload) < _SCORE_REQ_HEAD.size:
        raise WireError("score request payload truncated")
    n, h, w, c, space = _SCORE_REQ_HEAD.unpack_from(payload)
    if space not in (SPACE_RAW01, SPACE_NORMALIZED):
        raise WireError(f"unknown color space code {space}")
    if min(n, h, w) < 1 or c not in (1, 3):
        raise WireError(f"bad score request dims {n}x{h}x{w}x{c}")
    body = payload[_SCORE_REQ_HEAD.size :]
    if len(body) != n * h * w * c * 4:
        raise WireError(f"score request body is {len(body)} bytes, expected {n * h * w * c * 4}")
    return np.frombuffer(body, dtype="<f4").reshape(n, h, w, c).copy(), space


def encode_score_response(scores: np.ndarray) -> bytes:
    scores = np.ascontiguousarray(scores, dtype="<f4")
    n, k = scores.shape
    return _SCORE_RESP_HEAD.pack(n, k) + scores.tobytes()


def encode_capabilities(deterministic: bool, input_space: str, n_classes: int) -> bytes:
    doc = {
        "deterministic": bool(deterministic),
        "input_space": input_space,
        "n_classes": int(n_classes),
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")

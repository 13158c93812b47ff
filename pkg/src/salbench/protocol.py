"""Framed wire protocol for external scorer processes, and the client side of it.

Frame layout (little-endian):
    magic "SJSC" | version u16 = 1 | opcode u16 | seq u64 | payload_len u64 | payload
Opcodes: 0 = echo, 1 = score, 2 = capabilities; 3 is reserved for error
responses (payload = UTF-8 message), sent by servers for malformed requests.
"""

from __future__ import annotations

import json
import shlex
import socket
import struct
import subprocess
from dataclasses import dataclass

import numpy as np

from .core import ClassScoreVector, ColorSpace
from .errors import InvalidArgumentError, ProtocolError, ScorerUnavailableError
from .models import ModelAdapter, ScoreRequest

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

_SPACE_CODE = {ColorSpace.RAW01: 0, ColorSpace.NORMALIZED: 1}
_CODE_SPACE = {code: space for space, code in _SPACE_CODE.items()}


@dataclass(frozen=True)
class Frame:
    opcode: int
    seq: int
    payload: bytes


def encode_frame(frame: Frame) -> bytes:
    return HEADER.pack(MAGIC, VERSION, frame.opcode, frame.seq, len(frame.payload)) + frame.payload


def decode_header(raw: bytes):
    magic, version, opcode, seq, payload_len = HEADER.unpack(raw)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic bytes {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if payload_len > _MAX_PAYLOAD:
        raise ProtocolError(f"payload length {payload_len} exceeds limit")
    return opcode, seq, payload_len


def encode_score_request(stack: np.ndarray, space: ColorSpace) -> bytes:
    stack = np.ascontiguousarray(stack, dtype="<f4")
    if stack.ndim != 4:
        raise InvalidArgumentError(f"expected (n, H, W, C) stack, got shape {stack.shape}")
    n, h, w, c = stack.shape
    head = _SCORE_REQ_HEAD.pack(n, h, w, c, _SPACE_CODE[space])
    return head + stack.tobytes()


def decode_score_request(payload: bytes):
    if len(payload) < _SCORE_REQ_HEAD.size:
        raise ProtocolError("score request payload truncated")
    n, h, w, c, space_code = _SCORE_REQ_HEAD.unpack_from(payload)
    if space_code not in _CODE_SPACE:
        raise ProtocolError(f"unknown color space code {space_code}")
    if min(n, h, w) < 1 or c not in (1, 3):
        raise ProtocolError(f"bad score request dims {n}x{h}x{w}x{c}")
    body = payload[_SCORE_REQ_HEAD.size :]
    expected = n * h * w * c * 4
    if len(body) != expected:
        raise ProtocolError(f"score request body is {len(body)} bytes, expected {expected}")
    stack = np.frombuffer(body, dtype="<f4").reshape(n, h, w, c).copy()
    return stack, _CODE_SPACE[space_code]


def encode_score_response(scores: np.ndarray) -> bytes:
    scores = np.ascontiguousarray(scores, dtype="<f4")
    n, k = scores.shape
    return _SCORE_RESP_HEAD.pack(n, k) + scores.tobytes()


def decode_score_response(payload: bytes) -> np.ndarray:
    if len(payload) < _SCORE_RESP_HEAD.size:
        raise ProtocolError("score response payload truncated")
    n, k = _SCORE_RESP_HEAD.unpack_from(payload)
    body = payload[_SCORE_RESP_HEAD.size :]
    if n < 1 or k < 1 or len(body) != n * k * 4:
        raise ProtocolError(f"bad score response dims {n}x{k} for {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(n, k).copy()


def encode_capabilities(deterministic: bool, input_space: ColorSpace, n_classes: int) -> bytes:
    doc = {
        "deterministic": bool(deterministic),
        "input_space": input_space.value,
        "n_classes": int(n_classes),
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def decode_capabilities(payload: bytes) -> dict:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"capabilities payload is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("deterministic"), bool):
        raise ProtocolError("capabilities missing boolean 'deterministic'")
    if doc.get("input_space") not in ("raw01", "normalized"):
        raise ProtocolError("capabilities 'input_space' must be 'raw01' or 'normalized'")
    if not isinstance(doc.get("n_classes"), int) or doc["n_classes"] < 1:
        raise ProtocolError("capabilities 'n_classes' must be a positive integer")
    return doc


def parse_endpoint(endpoint: str):
    """Split 'tcp:host:port' or 'stdio:<command>' into (kind, detail)."""
    if endpoint.startswith("tcp:"):
        rest = endpoint[4:]
        host, sep, port = rest.rpartition(":")
        if not sep or not host or not port.isdigit():
            raise InvalidArgumentError(f"bad tcp endpoint {endpoint!r}, want tcp:host:port")
        return "tcp", (host, int(port))
    if endpoint.startswith("stdio:"):
        command = endpoint[6:]
        if not command.strip():
            raise InvalidArgumentError("stdio endpoint needs a command")
        return "stdio", command
    raise InvalidArgumentError(f"unknown endpoint {endpoint!r}, want tcp:... or stdio:...")


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
            self._sock.settimeout(timeout)
        except OSError as exc:
            raise ScorerUnavailableError(f"cannot connect to {host}:{port}: {exc}") from exc

    def write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ScorerUnavailableError(f"send failed: {exc}") from exc

    def read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self._sock.recv(remaining)
            except socket.timeout as exc:
                raise ScorerUnavailableError("scorer timed out") from exc
            except OSError as exc:
                raise ScorerUnavailableError(f"recv failed: {exc}") from exc
            if not chunk:
                raise ScorerUnavailableError("scorer closed the connection mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class _StdioTransport:
    def __init__(self, command: str):
        try:
            self._proc = subprocess.Popen(
                shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise ScorerUnavailableError(f"cannot start scorer {command!r}: {exc}") from exc

    def write(self, data: bytes) -> None:
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise ScorerUnavailableError(f"scorer pipe closed: {exc}") from exc

    def read_exact(self, n: int) -> bytes:
        data = self._proc.stdout.read(n)
        if data is None or len(data) != n:
            raise ScorerUnavailableError("scorer pipe closed mid-frame")
        return data

    def close(self) -> None:
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        self._proc.terminate()
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()


def write_frame(transport, frame: Frame) -> None:
    transport.write(encode_frame(frame))


def read_frame(transport) -> Frame:
    opcode, seq, payload_len = decode_header(transport.read_exact(HEADER.size))
    payload = transport.read_exact(payload_len) if payload_len else b""
    return Frame(opcode, seq, payload)


class RemoteScorer(ModelAdapter):
    """Client for an external scorer; one in-flight request per connection.

    The constructor performs the capabilities handshake, so `n_classes`,
    `input_space` and `deterministic` mirror what the scorer declared.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        kind, detail = parse_endpoint(endpoint)
        if kind == "tcp":
            self._transport = _TcpTransport(detail[0], detail[1], timeout)
        else:
            self._transport = _StdioTransport(detail)
        self._seq = 0
        caps = decode_capabilities(self.request(OP_CAPABILITIES, b""))
        self.deterministic = caps["deterministic"]
        self.input_space = ColorSpace(caps["input_space"])
        self.n_classes = caps["n_classes"]

    def request(self, opcode: int, payload: bytes) -> bytes:
        """Send one frame and return the matching response payload."""
        self._seq += 1
        write_frame(self._transport, Frame(opcode, self._seq, payload))
        resp = read_frame(self._transport)
        if resp.seq != self._seq:
            raise ProtocolError(f"response seq {resp.seq} does not match request {self._seq}")
        if resp.opcode == OP_ERROR:
            raise ProtocolError(f"scorer error: {resp.payload.decode('utf-8', 'replace')}")
        if resp.opcode != opcode:
            raise ProtocolError(f"response opcode {resp.opcode} does not match request {opcode}")
        return resp.payload

    def echo(self, payload: bytes) -> bytes:
        return self.request(OP_ECHO, payload)

    def score_batch(self, req: ScoreRequest) -> list[ClassScoreVector]:
        if req.space is not self.input_space:
            raise InvalidArgumentError(
                f"scorer wants {self.input_space.value} input, batch is {req.space.value}"
            )
        stack = np.stack([img.data for img in req.batch])
        scores = decode_score_response(self.request(OP_SCORE, encode_score_request(stack, req.space)))
        if scores.shape != (len(req.batch), self.n_classes):
            raise ProtocolError(f"scorer returned shape {scores.shape}, expected ({len(req.batch)}, {self.n_classes})")
        if not np.isfinite(scores).all() or scores.min() < 0.0 or scores.max() > 1.0:
            raise ProtocolError("scorer returned scores outside [0, 1]")
        return [ClassScoreVector(row, req.target_class) for row in scores]

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def remote_score(endpoint: str, req: ScoreRequest, timeout: float = 30.0) -> list[ClassScoreVector]:
    """One-shot scoring through a fresh connection."""
    with RemoteScorer(endpoint, timeout=timeout) as scorer:
        return scorer.score_batch(req)


def conformance_report(endpoint: str, timeout: float = 30.0) -> dict:
    """Exercise echo, capabilities, and deterministic re-scoring against a scorer.

    Returns {check name: bool}; used to validate third-party scorer servers.
    """
    checks = {}
    with RemoteScorer(endpoint, timeout=timeout) as scorer:
        checks["capabilities"] = scorer.n_classes >= 1
        probe = bytes(range(256)) * 3
        checks["echo"] = scorer.echo(probe) == probe
        rng = np.random.Generator(np.random.Philox(key=[20240, 0]))
        stack = rng.random((2, 8, 8, 3), dtype=np.float32)
        if scorer.input_space is ColorSpace.NORMALIZED:
            stack = (stack - 0.5) * 4.0
        payload = encode_score_request(stack, scorer.input_space)
        first = scorer.request(OP_SCORE, payload)
        second = scorer.request(OP_SCORE, payload)
        checks["deterministic_rescore"] = (first == second) or not scorer.deterministic
    return checks

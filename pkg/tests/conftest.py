"""Shared fixtures: image builders and an in-process reference scorer server."""

from __future__ import annotations

import socket
import threading

import numpy as np
import pytest

from salbench import protocol
from salbench.core import ColorSpace, ImageTensor
from salbench.errors import ProtocolError, SalbenchError, ScorerUnavailableError
from salbench.models import ScoreRequest


def make_image(values, space=ColorSpace.RAW01) -> ImageTensor:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return ImageTensor(arr, space)


class _ServerConn:
    def __init__(self, sock):
        self._sock = sock

    def write(self, data: bytes) -> None:
        self._sock.sendall(data)

    def read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            chunk = self._sock.recv(remaining)
            if not chunk:
                raise ScorerUnavailableError("client closed")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)


class LoopbackScorer:
    """Minimal protocol server around a synthetic model, for client tests.

    `mode` injects misbehavior: 'bad_magic' and 'bad_version' corrupt response
    headers, 'silent' never answers (for timeout tests).
    """

    def __init__(self, model, mode="ok", deterministic=True):
        self.model = model
        self.mode = mode
        self.deterministic = deterministic
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(4)
        self._listener.settimeout(0.2)
        self.port = self._listener.getsockname()[1]
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    @property
    def endpoint(self) -> str:
        return f"tcp:127.0.0.1:{self.port}"

    def _serve(self):
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._handle, args=(sock,), daemon=True).start()

    def _handle(self, sock):
        conn = _ServerConn(sock)
        try:
            while not self._stop.is_set():
                frame = protocol.read_frame(conn)
                if self.mode == "silent":
                    continue
                if self.mode == "bad_magic":
                    conn.write(b"XXXX" + protocol.encode_frame(frame)[4:])
                    continue
                if self.mode == "bad_version":
                    raw = bytearray(protocol.encode_frame(frame))
                    raw[4:6] = (99).to_bytes(2, "little")
                    conn.write(bytes(raw))
                    continue
                conn.write(protocol.encode_frame(self._respond(frame)))
        except SalbenchError:
            pass
        except OSError:
            pass
        finally:
            sock.close()

    def _respond(self, frame: protocol.Frame) -> protocol.Frame:
        try:
            if frame.opcode == protocol.OP_ECHO:
                return protocol.Frame(protocol.OP_ECHO, frame.seq, frame.payload)
            if frame.opcode == protocol.OP_CAPABILITIES:
                payload = protocol.encode_capabilities(
                    self.deterministic, self.model.input_space, self.model.n_classes
                )
                return protocol.Frame(protocol.OP_CAPABILITIES, frame.seq, payload)
            if frame.opcode == protocol.OP_SCORE:
                stack, space = protocol.decode_score_request(frame.payload)
                req = ScoreRequest(tuple(ImageTensor(im, space) for im in stack), 0)
                vectors = self.model.score_batch(req)
                scores = np.stack([v.scores for v in vectors])
                return protocol.Frame(protocol.OP_SCORE, frame.seq, protocol.encode_score_response(scores))
            raise ProtocolError(f"unknown opcode {frame.opcode}")
        except SalbenchError as exc:
            return protocol.Frame(protocol.OP_ERROR, frame.seq, str(exc).encode("utf-8"))

    def close(self):
        self._stop.set()
        self._listener.close()
        self._thread.join(timeout=2)


@pytest.fixture
def loopback():
    servers = []

    def start(model, mode="ok", deterministic=True):
        server = LoopbackScorer(model, mode=mode, deterministic=deterministic)
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.close()

"""Scorer service answering echo, capabilities, and score frames over TCP or stdio."""

from __future__ import annotations

import socket
import sys
import threading

import numpy as np
import torch

from . import wire
from .dataset import normalize
from .modelzoo import ExportError, ModelBundle, load_model


def _parse_endpoint(endpoint: str):
    if endpoint.startswith("tcp:"):
        host, sep, port = endpoint[4:].rpartition(":")
        if not sep or not host or not port.isdigit():
            raise ExportError(f"bad tcp endpoint {endpoint!r}, want tcp:host:port")
        return "tcp", (host, int(port))
    if endpoint == "stdio":
        return "stdio", None
    raise ExportError(f"unknown endpoint {endpoint!r} (want tcp:host:port or stdio)")


class ScorerService:
    """Serves one model; one in-flight request per connection, many connections."""

    def __init__(self, model_id: str, deterministic: bool = True):
        self.bundle: ModelBundle = load_model(model_id)
        self.deterministic = deterministic
        if deterministic:
            torch.use_deterministic_algorithms(True)
            torch.set_num_threads(1)
        self.bundle.model.eval()

    def respond(self, frame: wire.Frame) -> wire.Frame:
        try:
            if frame.opcode == wire.OP_ECHO:
                return wire.Frame(wire.OP_ECHO, frame.seq, frame.payload)
            if frame.opcode == wire.OP_CAPABILITIES:
                payload = wire.encode_capabilities(
                    self.deterministic, self.bundle.input_space, self.bundle.n_classes
                )
                return wire.Frame(wire.OP_CAPABILITIES, frame.seq, payload)
            if frame.opcode == wire.OP_SCORE:
                return wire.Frame(wire.OP_SCORE, frame.seq, self._score(frame.payload))
            raise wire.WireError(f"unknown opcode {frame.opcode}")
        except (wire.WireError, ExportError) as exc:
            return wire.Frame(wire.OP_ERROR, frame.seq, str(exc).encode("utf-8"))

    def _score(self, payload: bytes) -> bytes:
        stack, space = wire.decode_score_request(payload)
        if stack.shape[3] != 3:
            raise wire.WireError("this scorer needs 3-channel images")
        batch = torch.from_numpy(np.ascontiguousarray(stack)).permute(0, 3, 1, 2)
        if self.bundle.input_space == "normalized" and space == wire.SPACE_RAW01:
            batch = normalize(batch)
        elif self.bundle.input_space == "raw01" and space == wire.SPACE_NORMALIZED:
            raise wire.WireError("this scorer expects raw [0,1] input")
        with torch.no_grad():
            scores = self.bundle.model(batch)
        out = scores.numpy().astype(np.float32)
        if out.ndim != 2 or not np.isfinite(out).all():
            raise wire.WireError("model produced unusable scores")
        return wire.encode_score_response(np.clip(out, 0.0, 1.0))

    def handle_stream(self, read_exact, write) -> None:
        """Frame loop for one connection; malformed frames get error responses."""
        while True:
            try:
                frame = wire.read_frame(read_exact)
            except wire.Disconnect:
                return
            except wire.WireError as exc:
                # Header-level corruption: report and keep reading.
                write(wire.encode_frame(wire.Frame(wire.OP_ERROR, 0, str(exc).encode("utf-8"))))
                continue
            write(wire.encode_frame(self.respond(frame)))


def _socket_read_exact(sock):
    def read_exact(n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            chunk = sock.recv(remaining)
            if not chunk:
                raise wire.Disconnect
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    return read_exact


def serve_tcp(service: ScorerService, host: str, port: int, on_ready=None, stop_event=None):
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(8)
    listener.settimeout(0.2)
    if on_ready is not None:
        on_ready(listener.getsockname()[1])
    try:
        while stop_event is None or not stop_event.is_set():
            try:
                conn, _ = listener.accept()
            except socket.timeout:
                continue
            thread = threading.Thread(
                target=_handle_socket, args=(service, conn), daemon=True
            )
            thread.start()
    finally:
        listener.close()


def _handle_socket(service: ScorerService, conn) -> None:
    try:
        service.handle_stream(_socket_read_exact(conn), conn.sendall)
    except OSError:
        pass
    finally:
        conn.close()


def serve_stdio(service: ScorerService) -> None:
    def read_exact(n: int) -> bytes:
        data = sys.stdin.buffer.read(n)
        if data is None or len(data) != n:
            raise wire.Disconnect
        return data

    def write(data: bytes) -> None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()

    service.handle_stream(read_exact, write)


def serve_scorer(model_id: str, endpoint: str, deterministic: bool = True) -> None:
    """Blocking entry point: serve the model until the process is stopped."""
    kind, detail = _parse_endpoint(endpoint)
    service = ScorerService(model_id, deterministic=deterministic)
    if kind == "tcp":
        serve_tcp(service, detail[0], detail[1])
    else:
        serve_stdio(service)

"""Wire-protocol framing and client behavior against a reference loopback server."""

import sys
from pathlib import Path

import numpy as np
import pytest

from salbench import protocol
from salbench.core import ColorSpace, ImageTensor
from salbench.errors import InvalidArgumentError, ProtocolError, ScorerUnavailableError
from salbench.models import ConstantModel, RegionMeanModel, ScoreRequest
from salbench.protocol import RemoteScorer, conformance_report, remote_score

from conftest import make_image

STDIO_HELPER = Path(__file__).parent / "stdio_scorer.py"


class TestFraming:
    def test_frame_roundtrip(self):
        frame = protocol.Frame(protocol.OP_SCORE, 42, b"payload")
        raw = protocol.encode_frame(frame)
        opcode, seq, length = protocol.decode_header(raw[: protocol.HEADER.size])
        assert (opcode, seq, length) == (protocol.OP_SCORE, 42, 7)
        assert raw[protocol.HEADER.size :] == b"payload"

    def test_bad_magic_rejected(self):
        raw = bytearray(protocol.encode_frame(protocol.Frame(0, 1, b"")))
        raw[:4] = b"NOPE"
        with pytest.raises(ProtocolError):
            protocol.decode_header(bytes(raw[: protocol.HEADER.size]))

    def test_version_mismatch_rejected(self):
        raw = bytearray(protocol.encode_frame(protocol.Frame(0, 1, b"")))
        raw[4:6] = (7).to_bytes(2, "little")
        with pytest.raises(ProtocolError):
            protocol.decode_header(bytes(raw[: protocol.HEADER.size]))

    def test_score_request_payload_roundtrip(self):
        stack = np.random.default_rng(0).random((3, 4, 5, 3)).astype(np.float32)
        payload = protocol.encode_score_request(stack, ColorSpace.RAW01)
        decoded, space = protocol.decode_score_request(payload)
        assert space is ColorSpace.RAW01
        assert np.array_equal(decoded, stack)

    def test_truncated_score_request_rejected(self):
        stack = np.zeros((1, 2, 2, 1), dtype=np.float32)
        payload = protocol.encode_score_request(stack, ColorSpace.RAW01)
        with pytest.raises(ProtocolError):
            protocol.decode_score_request(payload[:-2])

    def test_score_response_roundtrip(self):
        scores = np.random.default_rng(1).random((2, 6)).astype(np.float32)
        assert np.array_equal(
            protocol.decode_score_response(protocol.encode_score_response(scores)), scores
        )

    def test_capabilities_validation(self):
        payload = protocol.encode_capabilities(True, ColorSpace.RAW01, 10)
        caps = protocol.decode_capabilities(payload)
        assert caps == {"deterministic": True, "input_space": "raw01", "n_classes": 10}
        with pytest.raises(ProtocolError):
            protocol.decode_capabilities(b"not json")
        with pytest.raises(ProtocolError):
            protocol.decode_capabilities(b'{"deterministic": true}')

    def test_endpoint_parsing(self):
        assert protocol.parse_endpoint("tcp:localhost:99") == ("tcp", ("localhost", 99))
        assert protocol.parse_endpoint("stdio:python x.py") == ("stdio", "python x.py")
        with pytest.raises(InvalidArgumentError):
            protocol.parse_endpoint("http://nope")
        with pytest.raises(InvalidArgumentError):
            protocol.parse_endpoint("tcp:nohost")


class TestRemoteScorer:
    def test_handshake_reads_capabilities(self, loopback):
        server = loopback(RegionMeanModel(region=((0, 0),), n_classes=7))
        with RemoteScorer(server.endpoint) as scorer:
            assert scorer.n_classes == 7
            assert scorer.input_space is ColorSpace.RAW01
            assert scorer.deterministic

    def test_identical_images_get_identical_vectors(self, loopback):
        server = loopback(RegionMeanModel(region=((0, 1),)))
        img = make_image(np.full((2, 2), 0.25, dtype=np.float32))
        with RemoteScorer(server.endpoint) as scorer:
            vectors = scorer.score_batch(ScoreRequest((img, img), 0))
        assert np.array_equal(vectors[0].scores, vectors[1].scores)
        assert vectors[0].target == pytest.approx(0.25)

    def test_echo_roundtrip(self, loopback):
        server = loopback(ConstantModel(0.5))
        payload = bytes(range(256))
        with RemoteScorer(server.endpoint) as scorer:
            assert scorer.echo(payload) == payload

    def test_deterministic_rescore_is_byte_identical(self, loopback):
        server = loopback(RegionMeanModel(region=((1, 1), (0, 0))))
        stack = np.random.default_rng(3).random((2, 3, 3, 1)).astype(np.float32)
        payload = protocol.encode_score_request(stack, ColorSpace.RAW01)
        with RemoteScorer(server.endpoint) as scorer:
            first = scorer.request(protocol.OP_SCORE, payload)
            second = scorer.request(protocol.OP_SCORE, payload)
        assert first == second

    def test_bad_magic_response_raises(self, loopback):
        server = loopback(ConstantModel(0.5), mode="bad_magic")
        with pytest.raises(ProtocolError):
            RemoteScorer(server.endpoint)

    def test_version_mismatch_response_raises(self, loopback):
        server = loopback(ConstantModel(0.5), mode="bad_version")
        with pytest.raises(ProtocolError):
            RemoteScorer(server.endpoint)

    def test_timeout_maps_to_scorer_unavailable(self, loopback):
        server = loopback(ConstantModel(0.5), mode="silent")
        with pytest.raises(ScorerUnavailableError):
            RemoteScorer(server.endpoint, timeout=0.3)

    def test_unreachable_endpoint(self):
        with pytest.raises(ScorerUnavailableError):
            RemoteScorer("tcp:127.0.0.1:1", timeout=0.3)

    def test_malformed_request_gets_error_frame_and_connection_survives(self, loopback):
        server = loopback(ConstantModel(0.5))
        with RemoteScorer(server.endpoint) as scorer:
            with pytest.raises(ProtocolError):
                scorer.request(protocol.OP_SCORE, b"garbage")
            assert scorer.echo(b"still alive") == b"still alive"

    def test_remote_score_one_shot(self, loopback):
        server = loopback(ConstantModel(0.9))
        img = make_image(np.zeros((2, 2), dtype=np.float32))
        vectors = remote_score(server.endpoint, ScoreRequest((img,), 0))
        assert vectors[0].target == pytest.approx(0.9)

    def test_conformance_report_passes_reference_server(self, loopback):
        server = loopback(RegionMeanModel(region=((0, 0),), n_classes=3))
        report = conformance_report(server.endpoint)
        assert report == {"capabilities": True, "echo": True, "deterministic_rescore": True}


class TestStdioTransport:
    def test_scoring_over_stdio(self):
        endpoint = f"stdio:{sys.executable} {STDIO_HELPER}"
        img = make_image(np.full((2, 2), 0.5, dtype=np.float32))
        with RemoteScorer(endpoint) as scorer:
            assert scorer.n_classes == 2
            vec = scorer.score_batch(ScoreRequest((img,), 0))[0]
            assert vec.target == pytest.approx(0.7)
            assert scorer.echo(b"ping") == b"ping"

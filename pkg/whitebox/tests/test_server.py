"""The scorer service exercised through the benchmark harness's protocol client."""

import sys

import numpy as np
import pytest
import torch

from salbench.core import ColorSpace, ImageTensor
from salbench.errors import ProtocolError
from salbench.models import ScoreRequest
from salbench.protocol import OP_SCORE, RemoteScorer, encode_score_request

from whitebox.dataset import normalize
from whitebox.modelzoo import load_model


def normalized_image(rng, size=16):
    data = rng.random((size, size, 3)).astype(np.float32)
    tensor = normalize(torch.from_numpy(data).permute(2, 0, 1)[None])
    return ImageTensor(tensor[0].permute(1, 2, 0).numpy(), ColorSpace.NORMALIZED)


class TestService:
    def test_capabilities_match_model(self, toy_scorer_endpoint):
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            assert scorer.n_classes == 5
            assert scorer.input_space is ColorSpace.NORMALIZED
            assert scorer.deterministic

    def test_scores_match_local_model(self, toy_scorer_endpoint):
        rng = np.random.default_rng(0)
        img = normalized_image(rng)
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            remote = scorer.score_batch(ScoreRequest((img,), 2))[0]
        bundle = load_model("toy")
        with torch.no_grad():
            local = bundle.model(torch.from_numpy(img.data.copy()).permute(2, 0, 1)[None])[0]
        np.testing.assert_allclose(remote.scores, local.numpy(), atol=1e-6)

    def test_echo(self, toy_scorer_endpoint):
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            payload = bytes(range(200))
            assert scorer.echo(payload) == payload

    def test_deterministic_double_scoring(self, toy_scorer_endpoint):
        rng = np.random.default_rng(1)
        stack = rng.normal(size=(2, 12, 12, 3)).astype(np.float32)
        payload = encode_score_request(stack, ColorSpace.NORMALIZED)
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            assert scorer.request(OP_SCORE, payload) == scorer.request(OP_SCORE, payload)

    def test_malformed_frame_gets_error_and_connection_survives(self, toy_scorer_endpoint):
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            with pytest.raises(ProtocolError):
                scorer.request(OP_SCORE, b"not a score request")
            assert scorer.echo(b"alive") == b"alive"

    def test_raw_input_normalized_server_side(self, toy_scorer_endpoint):
        # The service declares normalized input but converts raw batches itself.
        rng = np.random.default_rng(2)
        raw = rng.random((1, 16, 16, 3)).astype(np.float32)
        payload = encode_score_request(raw, ColorSpace.RAW01)
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            first = scorer.request(OP_SCORE, payload)
        normalized = normalize(torch.from_numpy(raw).permute(0, 3, 1, 2)).permute(0, 2, 3, 1).numpy()
        payload = encode_score_request(np.ascontiguousarray(normalized), ColorSpace.NORMALIZED)
        with RemoteScorer(toy_scorer_endpoint) as scorer:
            second = scorer.request(OP_SCORE, payload)
        np.testing.assert_allclose(
            np.frombuffer(first[8:], dtype="<f4"), np.frombuffer(second[8:], dtype="<f4"), atol=1e-6
        )


class TestStdioService:
    def test_scoring_over_stdio(self):
        endpoint = f"stdio:{sys.executable} -m whitebox.cli serve --model toy --endpoint stdio"
        rng = np.random.default_rng(3)
        img = normalized_image(rng, size=12)
        with RemoteScorer(endpoint, timeout=60.0) as scorer:
            assert scorer.n_classes == 5
            vec = scorer.score_batch(ScoreRequest((img,), 1))[0]
            assert 0.0 <= vec.target <= 1.0

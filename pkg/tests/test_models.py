"""Synthetic model oracles and the batched scoring helpers."""

import numpy as np
import pytest

from salbench.core import ClassScoreVector, ColorSpace, ImageTensor
from salbench.errors import InvalidArgumentError
from salbench.models import (
    ConstantModel,
    ModelAdapter,
    RegionMeanModel,
    ScoreRequest,
    score_batch,
    score_raw,
    score_raw_vectors,
)

from conftest import make_image


def region_mean_oracle(img: ImageTensor, region) -> float:
    total = 0.0
    for r, c in region:
        for ch in range(img.channels):
            total += float(img.data[r, c, ch])
    return total / (len(region) * img.channels)


class TestRegionMeanModel:
    def test_all_ones_scores_one(self):
        model = RegionMeanModel(region=((0, 0), (1, 1)))
        req = ScoreRequest((make_image(np.ones((3, 3), dtype=np.float32)),), 0)
        assert model.score_batch(req)[0].target == 1.0

    def test_half_region_scores_half(self):
        img = np.zeros((2, 2), dtype=np.float32)
        img[0, 0] = img[0, 1] = 1.0
        model = RegionMeanModel(region=((0, 0), (0, 1), (1, 0), (1, 1)))
        req = ScoreRequest((make_image(img),), 0)
        assert model.score_batch(req)[0].target == pytest.approx(0.5)

    def test_other_classes_are_complement(self):
        model = RegionMeanModel(region=((0, 0),), n_classes=4)
        img = np.full((2, 2), 0.25, dtype=np.float32)
        vec = model.score_batch(ScoreRequest((make_image(img),), 2))[0]
        assert vec.target == pytest.approx(0.25)
        np.testing.assert_allclose(np.delete(vec.scores, 2), 0.75, atol=1e-7)

    def test_matches_brute_force_mean(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            k = int(rng.integers(1, h * w))
            flat = rng.choice(h * w, size=k, replace=False)
            region = tuple((int(i // w), int(i % w)) for i in flat)
            img = make_image(rng.random((h, w, 3), dtype=np.float32))
            model = RegionMeanModel(region=region)
            got = model.score_batch(ScoreRequest((img,), 0))[0].target
            assert got == pytest.approx(region_mean_oracle(img, region), abs=1e-6)

    def test_region_bounds_checked_at_call(self):
        model = RegionMeanModel(region=((5, 5),))
        req = ScoreRequest((make_image(np.zeros((3, 3))),), 0)
        with pytest.raises(InvalidArgumentError):
            model.score_batch(req)

    def test_rejects_normalized_input(self):
        model = RegionMeanModel(region=((0, 0),))
        img = make_image(np.zeros((2, 2, 3)), space=ColorSpace.NORMALIZED)
        with pytest.raises(InvalidArgumentError):
            model.score_batch(ScoreRequest((img,), 0))


class TestConstantModel:
    def test_fixed_score(self):
        model = ConstantModel(0.7)
        vec = model.score_batch(ScoreRequest((make_image(np.zeros((2, 2))),), 1))[0]
        assert vec.target == pytest.approx(0.7)

    def test_value_range_validated(self):
        with pytest.raises(InvalidArgumentError):
            ConstantModel(1.5)


class TestScoreRequest:
    def test_empty_batch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ScoreRequest((), 0)

    def test_mixed_shapes_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ScoreRequest((make_image(np.zeros((2, 2))), make_image(np.zeros((3, 3)))), 0)


class TestBatching:
    def test_batch_of_copies_equals_repeated_singles(self):
        rng = np.random.default_rng(5)
        img = make_image(rng.random((4, 4, 3), dtype=np.float32))
        model = RegionMeanModel(region=((1, 2), (3, 3)))
        single = model.score_batch(ScoreRequest((img,), 0))[0]
        batch = model.score_batch(ScoreRequest((img,) * 5, 0))
        for vec in batch:
            assert np.array_equal(vec.scores, single.scores)

    def test_score_raw_chunks_all_images(self):
        model = ConstantModel(0.3)
        stack = np.zeros((70, 2, 2, 1), dtype=np.float32)
        scores = score_raw(model, stack, 0, batch_size=32)
        assert scores.shape == (70,)
        np.testing.assert_allclose(scores, 0.3, atol=1e-7)

    def test_score_raw_normalizes_for_normalized_models(self):
        seen = []

        class Probe(ModelAdapter):
            n_classes = 2
            input_space = ColorSpace.NORMALIZED

            def score_batch(self, req):
                seen.extend(img.data for img in req.batch)
                half = np.full(2, 0.5, dtype=np.float32)
                return [ClassScoreVector(half, req.target_class) for _ in req.batch]

        rng = np.random.default_rng(9)
        stack = rng.random((2, 3, 3, 3), dtype=np.float32)
        score_raw(Probe(), stack, 0)
        mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
        std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
        np.testing.assert_allclose(seen[0], (stack[0] - mean) / std, atol=1e-6)

    def test_score_raw_vectors_shape(self):
        model = RegionMeanModel(region=((0, 0),), n_classes=5)
        stack = np.ones((3, 2, 2, 1), dtype=np.float32)
        vectors = score_raw_vectors(model, stack, 4)
        assert vectors.shape == (3, 5)

    def test_score_batch_function_delegates(self):
        model = ConstantModel(0.2)
        req = ScoreRequest((make_image(np.zeros((2, 2))),), 0)
        assert score_batch(model, req)[0].target == pytest.approx(0.2)

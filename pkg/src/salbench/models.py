"""Batched scoring interface plus deterministic synthetic models used as exact oracles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ClassScoreVector, ColorSpace, ImageTensor, NormalizationSpec
from .errors import InvalidArgumentError

DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class ScoreRequest:
    """A uniform batch of images to score against one target class."""

    batch: tuple
    target_class: int

    def __post_init__(self):
        batch = tuple(self.batch)
        if not batch:
            raise InvalidArgumentError("score request batch is empty")
        first = batch[0]
        for img in batch[1:]:
            if img.data.shape != first.data.shape or img.space is not first.space:
                raise InvalidArgumentError("all images in a batch must share shape and space")
        object.__setattr__(self, "batch", batch)

    @property
    def space(self) -> ColorSpace:
        return self.batch[0].space


class ModelAdapter:
    """Abstract batched scorer: images in, one per-class score vector per image."""

    n_classes: int
    input_space: ColorSpace
    deterministic: bool = True

    def score_batch(self, req: ScoreRequest) -> list[ClassScoreVector]:
        raise NotImplementedError


@dataclass(frozen=True)
class RegionMeanModel(ModelAdapter):
    """Target score = mean raw intensity over a fixed pixel region; other classes get 1 - mean.

    The region makes an exact, hand-computable oracle for every perturbation metric.
    """

    region: tuple
    n_classes: int = 2
    input_space = ColorSpace.RAW01

    def __post_init__(self):
        region = tuple((int(r), int(c)) for r, c in self.region)
        if not region:
            raise InvalidArgumentError("region must be non-empty")
        if self.n_classes < 2:
            raise InvalidArgumentError("need at least 2 classes")
        object.__setattr__(self, "region", region)

    def score_batch(self, req: ScoreRequest) -> list[ClassScoreVector]:
        if req.space is not ColorSpace.RAW01:
            raise InvalidArgumentError("RegionMeanModel scores raw [0,1] images")
        if not 0 <= req.target_class < self.n_classes:
            raise InvalidArgumentError("target class out of range")
        h, w = req.batch[0].height, req.batch[0].width
        rows = np.array([r for r, _ in self.region])
        cols = np.array([c for _, c in self.region])
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= h or cols.max() >= w:
            raise InvalidArgumentError(f"region exceeds image bounds {h}x{w}")
        out = []
        for img in req.batch:
            mean = float(img.data[rows, cols, :].astype(np.float64).mean())
            scores = np.full(self.n_classes, 1.0 - mean, dtype=np.float32)
            scores[req.target_class] = mean
            out.append(ClassScoreVector(scores, req.target_class))
        return out


@dataclass(frozen=True)
class ConstantModel(ModelAdapter):
    """Scores every class of every image with one fixed value."""

    value: float = 0.5
    n_classes: int = 2
    input_space = ColorSpace.RAW01

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InvalidArgumentError("constant score must lie in [0, 1]")

    def score_batch(self, req: ScoreRequest) -> list[ClassScoreVector]:
        scores = np.full(self.n_classes, self.value, dtype=np.float32)
        return [ClassScoreVector(scores, req.target_class) for _ in req.batch]


def score_batch(model: ModelAdapter, req: ScoreRequest) -> list[ClassScoreVector]:
    return model.score_batch(req)


def score_raw_vectors(
    model: ModelAdapter,
    stack: np.ndarray,
    target: int,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Score an (n, H, W, C) stack of raw [0,1] images; returns (n, n_classes) float64.

    Normalizes the stack first when the model declares normalized input, and
    chunks requests to `batch_size` images to bound memory.
    """
    stack = np.asarray(stack, dtype=np.float32)
    if stack.ndim != 4:
        raise InvalidArgumentError(f"expected (n, H, W, C) stack, got shape {stack.shape}")
    if batch_size < 1:
        raise InvalidArgumentError("batch size must be >= 1")
    space = ColorSpace.RAW01
    if model.input_space is ColorSpace.NORMALIZED:
        if stack.shape[3] != 3:
            raise InvalidArgumentError("model wants normalized input; need 3 channels")
        mean = np.asarray(norm.mean, dtype=np.float32)
        std = np.asarray(norm.std, dtype=np.float32)
        stack = (stack - mean) / std
        space = ColorSpace.NORMALIZED
    out = np.empty((stack.shape[0], model.n_classes), dtype=np.float64)
    for start in range(0, stack.shape[0], batch_size):
        chunk = stack[start : start + batch_size]
        req = ScoreRequest(tuple(ImageTensor(im, space) for im in chunk), target)
        vectors = model.score_batch(req)
        for j, vec in enumerate(vectors):
            out[start + j] = vec.scores
    return out


def score_raw(
    model: ModelAdapter,
    stack: np.ndarray,
    target: int,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Target-class scores for an (n, H, W, C) raw stack; returns (n,) float64."""
    return score_raw_vectors(model, stack, target, norm, batch_size)[:, target]


def score_image(
    model: ModelAdapter,
    image: ImageTensor,
    target: int,
    norm: NormalizationSpec = NormalizationSpec(),
) -> ClassScoreVector:
    """Score a single raw image, returning the full class vector."""
    vec = score_raw_vectors(model, image.data[None], target, norm)[0]
    return ClassScoreVector(vec.astype(np.float32), target)

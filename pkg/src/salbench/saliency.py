"""Black-box explanation generation and map postprocessing.

Both generators perturb the raw [0,1] image and weight perturbations by the
score difference they cause; re-normalization for the model happens inside the
scoring helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ImageTensor,
    NormalizationSpec,
    SaliencyMap,
    gaussian_blur_array,
    minmax_scale,
    resize_bilinear_array,
)
from .errors import InvalidArgumentError, InvalidStateError
from .models import DEFAULT_BATCH_SIZE, ModelAdapter, score_raw
from .rng import philox


@dataclass(frozen=True)
class RiseConfig:
    """Randomized-mask explanation settings; `seed` pins the whole mask stream."""

    n_masks: int = 4000
    grid_h: int = 7
    grid_w: int = 7
    keep_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_masks < 1:
            raise InvalidArgumentError("n_masks must be >= 1")
        if self.grid_h < 1 or self.grid_w < 1:
            raise InvalidArgumentError("mask grid dims must be >= 1")
        if not 0.0 < self.keep_prob < 1.0:
            raise InvalidArgumentError("keep_prob must lie in (0, 1)")


@dataclass(frozen=True)
class OcclusionConfig:
    """Sliding-window occlusion settings; stride <= window guarantees full coverage."""

    window: int = 16
    stride: int = 8
    fill: float = 0.0

    def __post_init__(self):
        if self.window < 1:
            raise InvalidArgumentError("window must be >= 1")
        if not 1 <= self.stride <= self.window:
            raise InvalidArgumentError("stride must satisfy 1 <= stride <= window")
        if not 0.0 <= self.fill <= 1.0:
            raise InvalidArgumentError("fill value must lie in [0, 1] (raw space)")


@dataclass(frozen=True)
class KdeCurve:
    """Gaussian KDE of relevance values, evaluated on a fixed grid."""

    eval_points: np.ndarray
    densities: np.ndarray
    bandwidth: float

    def __post_init__(self):
        pts = np.asarray(self.eval_points, dtype=np.float32)
        den = np.asarray(self.densities, dtype=np.float32)
        if pts.shape != den.shape or pts.ndim != 1:
            raise InvalidArgumentError("eval points and densities must be 1-D and equally long")
        if self.bandwidth <= 0:
            raise InvalidArgumentError("bandwidth must be > 0")
        if den.min() < 0:
            raise InvalidArgumentError("densities must be >= 0")
        object.__setattr__(self, "eval_points", pts)
        object.__setattr__(self, "densities", den)


def rise_mask(cfg: RiseConfig, index: int, height: int, width: int) -> np.ndarray:
    """Mask `index` of the stream: Bernoulli cell grid, bilinearly upsampled with a random sub-cell shift."""
    rng = philox(cfg.seed, index)
    cells = (rng.random((cfg.grid_h, cfg.grid_w)) < cfg.keep_prob).astype(np.float64)
    while not cells.any():  # all-zero grids are redrawn, so masks always have area
        cells = (rng.random((cfg.grid_h, cfg.grid_w)) < cfg.keep_prob).astype(np.float64)
    cell_h = math.ceil(height / cfg.grid_h)
    cell_w = math.ceil(width / cfg.grid_w)
    up = resize_bilinear_array(cells, (cfg.grid_h + 1) * cell_h, (cfg.grid_w + 1) * cell_w)
    dy = int(rng.integers(0, cell_h))
    dx = int(rng.integers(0, cell_w))
    return up[dy : dy + height, dx : dx + width].astype(np.float32)


def mask_weighted_relevance(
    model: ModelAdapter,
    image: ImageTensor,
    masks: np.ndarray,
    keep_prob: float,
    target: int,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Sum of score-weighted masks over (n, H, W) `masks`, divided by n * keep_prob.

    This is the aggregation shared by sampled and exhaustive mask evaluation;
    accumulation runs in float64 in mask order.
    """
    masks = np.asarray(masks, dtype=np.float32)
    if masks.ndim != 3 or masks.shape[1:] != (image.height, image.width):
        raise InvalidArgumentError("masks must be (n, H, W) matching the image")
    acc = np.zeros((image.height, image.width), dtype=np.float64)
    for start in range(0, masks.shape[0], batch_size):
        chunk = masks[start : start + batch_size]
        masked = image.data[None] * chunk[:, :, :, None]
        scores = score_raw(model, masked, target, norm, batch_size)
        acc += np.tensordot(scores, chunk.astype(np.float64), axes=(0, 0))
    return acc / (masks.shape[0] * keep_prob)


def rise(
    model: ModelAdapter,
    image: ImageTensor,
    cfg: RiseConfig,
    target: int,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Randomized-mask relevance grid; bit-identical for a fixed config seed."""
    acc = np.zeros((image.height, image.width), dtype=np.float64)
    for start in range(0, cfg.n_masks, batch_size):
        count = min(batch_size, cfg.n_masks - start)
        masks = np.stack(
            [rise_mask(cfg, start + j, image.height, image.width) for j in range(count)]
        )
        masked = image.data[None] * masks[:, :, :, None]
        scores = score_raw(model, masked, target, norm, batch_size)
        acc += np.tensordot(scores, masks.astype(np.float64), axes=(0, 0))
    return acc / (cfg.n_masks * cfg.keep_prob)


def occlusion(
    model: ModelAdapter,
    image: ImageTensor,
    cfg: OcclusionConfig,
    target: int,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Sliding-window relevance: per-pixel coverage-averaged score drops."""
    h, w = image.height, image.width
    if cfg.window > min(h, w):
        raise InvalidArgumentError(f"window {cfg.window} larger than image {h}x{w}")
    rows = _window_starts(h, cfg.window, cfg.stride)
    cols = _window_starts(w, cfg.window, cfg.stride)
    positions = [(r, c) for r in rows for c in cols]
    base = score_raw(model, image.data[None], target, norm, batch_size)[0]

    acc = np.zeros((h, w), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=np.float64)
    for start in range(0, len(positions), batch_size):
        chunk = positions[start : start + batch_size]
        stack = np.repeat(image.data[None], len(chunk), axis=0)
        for j, (r, c) in enumerate(chunk):
            stack[j, r : r + cfg.window, c : c + cfg.window, :] = cfg.fill
        scores = score_raw(model, stack, target, norm, batch_size)
        for (r, c), s in zip(chunk, scores):
            acc[r : r + cfg.window, c : c + cfg.window] += base - s
            coverage[r : r + cfg.window, c : c + cfg.window] += 1.0
    return acc / coverage


def _window_starts(extent: int, window: int, stride: int) -> list:
    starts = list(range(0, extent - window + 1, stride))
    if starts[-1] != extent - window:
        starts.append(extent - window)
    return starts


def postprocess(raw: np.ndarray) -> SaliencyMap:
    """Clamp negative relevance to zero, then min-max scale to [0,1]."""
    arr = np.asarray(raw, dtype=np.float32)
    return minmax_scale(np.maximum(arr, np.float32(0.0)))


def coarsen(smap: SaliencyMap, kernel_size: int, sigma: float) -> SaliencyMap:
    """Artificially induce coarseness: Gaussian-blur the map, then re-scale to [0,1]."""
    if not smap.postprocessed:
        raise InvalidStateError("coarsen expects a postprocessed map")
    return minmax_scale(gaussian_blur_array(smap.data, kernel_size, sigma))


def sparsity_kde(maps, bandwidth: float = 0.05, eval_points=None) -> KdeCurve:
    """Gaussian KDE over all pixel values of all maps (the relevance distribution)."""
    maps = list(maps)
    if not maps:
        raise InvalidArgumentError("need at least one map")
    if bandwidth <= 0:
        raise InvalidArgumentError("bandwidth must be > 0")
    if eval_points is None:
        eval_points = np.linspace(0.0, 1.0, 201)
    eval_points = np.asarray(eval_points, dtype=np.float64)
    values = np.concatenate([m.data.ravel() for m in maps]).astype(np.float64)
    densities = np.zeros(eval_points.shape[0], dtype=np.float64)
    inv = 1.0 / (bandwidth * math.sqrt(2.0 * math.pi))
    chunk = 1 << 16
    for start in range(0, values.shape[0], chunk):
        z = (eval_points[:, None] - values[None, start : start + chunk]) / bandwidth
        densities += np.exp(-0.5 * z * z).sum(axis=1)
    densities *= inv / values.shape[0]
    return KdeCurve(eval_points.astype(np.float32), densities.astype(np.float32), float(bandwidth))

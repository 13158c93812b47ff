"""Image and saliency-map primitives plus the deterministic pixel operations shared by every metric."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidArgumentError, InvalidDataError, InvalidStateError

ILSVRC_MEAN = (0.485, 0.456, 0.406)
ILSVRC_STD = (0.229, 0.224, 0.225)


class ColorSpace(Enum):
    RAW01 = "raw01"
    NORMALIZED = "normalized"


def _frozen_f32(data, ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float32, order="C")
    if arr is data:
        arr = arr.copy()
    if arr.ndim != ndim:
        raise InvalidArgumentError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidDataError(f"{name} contains NaN or Inf")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageTensor:
    """H x W x C float32 image, channel-last, in raw [0,1] or normalized space."""

    data: np.ndarray
    space: ColorSpace = ColorSpace.RAW01

    def __post_init__(self):
        arr = _frozen_f32(self.data, 3, "image")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise InvalidArgumentError(f"image dims must be >= 1, got {h}x{w}")
        if c not in (1, 3):
            raise InvalidArgumentError(f"image must have 1 or 3 channels, got {c}")
        if self.space is ColorSpace.RAW01 and (arr.min() < 0.0 or arr.max() > 1.0):
            raise InvalidDataError("raw-space image values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class SaliencyMap:
    """H x W relevance grid; postprocessed maps are min-max scaled to [0,1]."""

    data: np.ndarray
    postprocessed: bool = False

    def __post_init__(self):
        arr = _frozen_f32(self.data, 2, "saliency map")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError(f"saliency map dims must be >= 1, got {arr.shape}")
        if self.postprocessed:
            mx = float(arr.max())
            if arr.min() < 0.0 or mx > 1.0 or (mx != 1.0 and mx != 0.0):
                raise InvalidDataError("postprocessed map must lie in [0,1] with max 1 (or be all zero)")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ClassScoreVector:
    """Per-class scores in [0,1] for one image, with the class under evaluation."""

    scores: np.ndarray
    target_class: int

    def __post_init__(self):
        arr = _frozen_f32(self.scores, 1, "scores")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidDataError("class scores must lie in [0, 1]")
        if not 0 <= self.target_class < arr.shape[0]:
            raise InvalidArgumentError(
                f"target class {self.target_class} out of range for {arr.shape[0]} classes"
            )
        object.__setattr__(self, "scores", arr)

    @property
    def target(self) -> float:
        return float(self.scores[self.target_class])


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-channel mean/std used to map raw [0,1] pixels into model space."""

    mean: tuple = ILSVRC_MEAN
    std: tuple = ILSVRC_STD

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise InvalidArgumentError("normalization spec needs 3 mean and 3 std components")
        if any(s <= 0 for s in self.std):
            raise InvalidArgumentError("std components must be > 0")


def gaussian_kernel(kernel_size: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian kernel as float64."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise InvalidArgumentError(f"kernel size must be odd and >= 1, got {kernel_size}")
    if sigma <= 0:
        raise InvalidArgumentError(f"sigma must be > 0, got {sigma}")
    r = kernel_size // 2
    xs = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve1d_edge(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (r, r)
    padded = np.pad(arr, pad, mode="edge")
    out = np.zeros_like(arr)
    index = [slice(None)] * arr.ndim
    for i, w in enumerate(kernel):
        index[axis] = slice(i, i + arr.shape[axis])
        out += w * padded[tuple(index)]
    return out


def gaussian_blur_array(arr: np.ndarray, kernel_size: int, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicate-edge padding, accumulated in float64.

    Accepts a 2-D grid or a channel-last 3-D image; blurs each channel independently.
    """
    kernel = gaussian_kernel(kernel_size, sigma)
    a = np.asarray(arr, dtype=np.float64)
    out = _convolve1d_edge(a, kernel, axis=0)
    return _convolve1d_edge(out, kernel, axis=1)


def gaussian_blur(img: ImageTensor, kernel_size: int, sigma: float) -> ImageTensor:
    """Blur every channel; output keeps the input's dims and color space."""
    out = gaussian_blur_array(img.data, kernel_size, sigma).astype(np.float32)
    if img.space is ColorSpace.RAW01:
        np.clip(out, 0.0, 1.0, out=out)
    return ImageTensor(out, img.space)


def normalize(img: ImageTensor, spec: NormalizationSpec = NormalizationSpec()) -> ImageTensor:
    """Map a raw [0,1] image into normalized space: (x - mean) / std per channel."""
    if img.space is not ColorSpace.RAW01:
        raise InvalidStateError("image is already normalized")
    if img.channels != 3:
        raise InvalidArgumentError("normalization requires a 3-channel image")
    mean = np.asarray(spec.mean, dtype=np.float32)
    std = np.asarray(spec.std, dtype=np.float32)
    return ImageTensor((img.data - mean) / std, ColorSpace.NORMALIZED)


def denormalize(img: ImageTensor, spec: NormalizationSpec = NormalizationSpec()) -> ImageTensor:
    """Algebraic inverse of :func:`normalize`; clamps float round-off to [0,1]."""
    if img.space is not ColorSpace.NORMALIZED:
        raise InvalidStateError("image is not in normalized space")
    mean = np.asarray(spec.mean, dtype=np.float32)
    std = np.asarray(spec.std, dtype=np.float32)
    out = img.data * std + mean
    np.clip(out, 0.0, 1.0, out=out)
    return ImageTensor(out, ColorSpace.RAW01)


def minmax_scale(values: np.ndarray) -> SaliencyMap:
    """Rescale a raw relevance grid to [0,1]; a constant grid maps to all zeros."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"relevance grid must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidDataError("relevance grid contains NaN or Inf")
    mn = float(arr.min())
    mx = float(arr.max())
    if mx == mn:
        out = np.zeros_like(arr)
    else:
        out = (arr - np.float32(mn)) / np.float32(mx - mn)
    return SaliencyMap(out, postprocessed=True)


def _linear_coords(n_in: int, n_out: int):
    # Half-pixel centers, align-corners disabled; out-of-range taps replicate the edge.
    centers = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    lo = np.floor(centers).astype(np.int64)
    frac = centers - lo
    return np.clip(lo, 0, n_in - 1), np.clip(lo + 1, 0, n_in - 1), frac


def resize_bilinear_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of a 2-D grid or channel-last 3-D image, in float64."""
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"output dims must be >= 1, got {out_h}x{out_w}")
    a = np.asarray(arr, dtype=np.float64)
    r0, r1, fr = _linear_coords(a.shape[0], out_h)
    fr = fr.reshape((-1,) + (1,) * (a.ndim - 1))
    rows = a[r0] * (1.0 - fr) + a[r1] * fr
    c0, c1, fc = _linear_coords(a.shape[1], out_w)
    fc = fc.reshape((1, -1) + (1,) * (a.ndim - 2))
    out = rows[:, c0] * (1.0 - fc) + rows[:, c1] * fc
    # Convex interpolation cannot leave the input range; clip float round-off.
    return np.clip(out, a.min(), a.max())


def resize_bilinear(img: ImageTensor, out_h: int, out_w: int) -> ImageTensor:
    """Bilinear resize; output values stay within the input's [min, max]."""
    out = resize_bilinear_array(img.data, out_h, out_w).astype(np.float32)
    return ImageTensor(out, img.space)

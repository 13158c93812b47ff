"""Insertion and deletion curves over configurable baselines and granularities, plus AUC."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import ILSVRC_MEAN, ColorSpace, ImageTensor, NormalizationSpec, SaliencyMap, gaussian_blur
from .errors import InvalidArgumentError, InvalidStateError
from .models import DEFAULT_BATCH_SIZE, ModelAdapter, score_raw
from .rng import philox


@dataclass(frozen=True)
class DatasetMeanBaseline:
    """Constant raw-space image at the dataset mean (zero after normalization)."""

    mean: tuple = ILSVRC_MEAN


@dataclass(frozen=True)
class BlurBaseline:
    kernel_size: int = 11
    sigma: float = 5.0


@dataclass(frozen=True)
class UniformNoiseBaseline:
    seed: int = 0


BaselineKind = Union[DatasetMeanBaseline, BlurBaseline, UniformNoiseBaseline]


@dataclass(frozen=True)
class PixelGranularity:
    pass


@dataclass(frozen=True)
class RegionGranularity:
    """Perturb the (2*radius+1)^2 window around each selected pixel; radius 4 gives 9x9."""

    radius: int = 4

    def __post_init__(self):
        if self.radius < 1:
            raise InvalidArgumentError("region radius must be >= 1")


Granularity = Union[PixelGranularity, RegionGranularity]


def baseline_label(kind: BaselineKind) -> str:
    if isinstance(kind, DatasetMeanBaseline):
        return "mean"
    if isinstance(kind, BlurBaseline):
        return "blur"
    return "uniform"


def granularity_label(g: Granularity) -> str:
    return "pixel" if isinstance(g, PixelGranularity) else "region"


@dataclass(frozen=True)
class Curve:
    """Model score against the fraction of perturbed pixels, from 0 to 1."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float32)
        ys = np.asarray(self.ys, dtype=np.float32)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.shape[0] < 2:
            raise InvalidArgumentError("curve needs matching 1-D xs/ys with >= 2 points")
        if xs[0] != 0.0 or xs[-1] != 1.0 or not (np.diff(xs) > 0).all():
            raise InvalidArgumentError("xs must increase strictly from 0 to 1")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise InvalidArgumentError("curve values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)


def make_baseline(image: ImageTensor, kind: BaselineKind) -> ImageTensor:
    """Uninformative image to insert from / delete into, in raw [0,1] space."""
    if image.space is not ColorSpace.RAW01:
        raise InvalidArgumentError("baselines are defined over raw [0,1] images")
    if isinstance(kind, DatasetMeanBaseline):
        mean = np.asarray(kind.mean, dtype=np.float32).reshape(-1)
        if mean.size == 1:
            mean = np.repeat(mean, image.channels)
        if mean.size != image.channels:
            raise InvalidArgumentError(
                f"dataset mean has {mean.size} components for {image.channels} channels"
            )
        data = np.broadcast_to(mean, image.data.shape).astype(np.float32)
        return ImageTensor(data.copy(), ColorSpace.RAW01)
    if isinstance(kind, BlurBaseline):
        return gaussian_blur(image, kind.kernel_size, kind.sigma)
    if isinstance(kind, UniformNoiseBaseline):
        rng = philox(kind.seed)
        return ImageTensor(rng.random(image.data.shape, dtype=np.float32), ColorSpace.RAW01)
    raise InvalidArgumentError(f"unknown baseline kind {kind!r}")


def perturbation_order(smap: SaliencyMap, g: Granularity) -> list:
    """Disjoint groups of flat pixel indices in perturbation order (most relevant first).

    Pixel granularity yields singleton groups sorted by descending saliency with
    row-major tie-breaks; region granularity repeatedly takes the window around
    the highest remaining pixel. Groups partition the pixel set exactly.
    """
    if not smap.postprocessed:
        raise InvalidStateError("perturbation order expects a postprocessed map")
    h, w = smap.height, smap.width
    flat = smap.data.ravel()
    if isinstance(g, PixelGranularity):
        order = np.argsort(-flat, kind="stable")
        return [order[i : i + 1] for i in range(order.shape[0])]
    radius = g.radius
    work = flat.astype(np.float64).copy()
    taken = np.zeros(h * w, dtype=bool)
    groups = []
    remaining = h * w
    while remaining:
        seed = int(np.argmax(work))
        r, c = divmod(seed, w)
        r0, r1 = max(0, r - radius), min(h, r + radius + 1)
        c0, c1 = max(0, c - radius), min(w, c + radius + 1)
        rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
        window = (rr * w + cc).ravel()
        members = window[~taken[window]]
        taken[members] = True
        work[members] = -np.inf
        groups.append(members)
        remaining -= members.shape[0]
    return groups


def _snapshot_boundaries(group_sizes, total: int, step_fraction: float):
    """Group indices after which the curve is re-scored."""
    cums = np.cumsum(group_sizes)
    boundaries = []
    prev_bucket = 0
    for j, count in enumerate(cums):
        bucket = math.floor(count / total / step_fraction + 1e-9)
        if bucket > prev_bucket or count == total:
            boundaries.append(j)
            prev_bucket = bucket
    return cums, boundaries


def _perturbation_curve(
    model: ModelAdapter,
    image: ImageTensor,
    smap: SaliencyMap,
    baseline: BaselineKind,
    g: Granularity,
    step_fraction: float,
    target: int,
    insert: bool,
    norm: NormalizationSpec,
    batch_size: int,
) -> Curve:
    if not 0.0 < step_fraction <= 1.0:
        raise InvalidArgumentError("step fraction must lie in (0, 1]")
    if (smap.height, smap.width) != (image.height, image.width):
        raise InvalidArgumentError("saliency map dims must match the image")
    groups = perturbation_order(smap, g)
    order = np.concatenate(groups)
    cums, boundaries = _snapshot_boundaries([len(grp) for grp in groups], order.shape[0], step_fraction)
    total = order.shape[0]

    base_img = make_baseline(image, baseline)
    source = image.data if insert else base_img.data
    work = (base_img.data if insert else image.data).copy()

    snapshots = np.empty((len(boundaries) + 1,) + work.shape, dtype=np.float32)
    snapshots[0] = work
    xs = [0.0]
    pos = 0
    w = image.width
    for k, j in enumerate(boundaries):
        upto = int(cums[j])
        idx = order[pos:upto]
        rows, cols = np.divmod(idx, w)
        work[rows, cols, :] = source[rows, cols, :]
        snapshots[k + 1] = work
        xs.append(upto / total)
        pos = upto
    ys = score_raw(model, snapshots, target, norm, batch_size)
    return Curve(np.asarray(xs, dtype=np.float32), ys.astype(np.float32))


def deletion_curve(
    model: ModelAdapter,
    image: ImageTensor,
    smap: SaliencyMap,
    baseline: BaselineKind,
    g: Granularity = PixelGranularity(),
    step_fraction: float = 0.01,
    target: int = 0,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> Curve:
    """Score as the most relevant pixels are progressively replaced by the baseline."""
    return _perturbation_curve(
        model, image, smap, baseline, g, step_fraction, target, False, norm, batch_size
    )


def insertion_curve(
    model: ModelAdapter,
    image: ImageTensor,
    smap: SaliencyMap,
    baseline: BaselineKind,
    g: Granularity = PixelGranularity(),
    step_fraction: float = 0.01,
    target: int = 0,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> Curve:
    """Score as the most relevant original pixels are progressively inserted into the baseline."""
    return _perturbation_curve(
        model, image, smap, baseline, g, step_fraction, target, True, norm, batch_size
    )


def auc(curve: Curve) -> float:
    """Trapezoidal area under the curve; xs already span [0, 1]."""
    return float(np.trapezoid(curve.ys.astype(np.float64), curve.xs.astype(np.float64)))


def curve_to_csv(curve: Curve) -> str:
    out = io.StringIO()
    out.write("x,y\n")
    for x, y in zip(curve.xs, curve.ys):
        out.write(f"{x:.9g},{y:.9g}\n")
    return out.getvalue()


def curve_from_csv(text: str) -> Curve:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "x,y":
        raise InvalidArgumentError("curve CSV must start with an 'x,y' header")
    xs, ys = [], []
    for ln in lines[1:]:
        sx, sy = ln.split(",")
        xs.append(float(sx))
        ys.append(float(sy))
    return Curve(np.asarray(xs, dtype=np.float32), np.asarray(ys, dtype=np.float32))

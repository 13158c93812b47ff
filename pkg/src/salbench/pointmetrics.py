"""Single-pass metrics: average drop, increase-in-confidence, binarized drop, pointing game."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ColorSpace, ImageTensor, SaliencyMap
from .errors import (
    EmptyAggregateError,
    InvalidArgumentError,
    InvalidStateError,
    MissingAnnotationError,
    UndefinedDropError,
)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel-coordinate box for one class, in the resized image frame."""

    class_id: int
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise InvalidArgumentError("box min corner must not exceed max corner")
        if min(self.x_min, self.y_min) < 0:
            raise InvalidArgumentError("box coordinates must be >= 0")

    def contains(self, row: int, col: int) -> bool:
        return self.y_min <= row <= self.y_max and self.x_min <= col <= self.x_max


@dataclass(frozen=True)
class DropResult:
    """Normalized score drop under saliency masking; increase implies zero drop."""

    drop: float
    confidence_increased: bool

    def __post_init__(self):
        if not 0.0 <= self.drop <= 1.0:
            raise InvalidArgumentError("drop must lie in [0, 1]")
        if self.confidence_increased and self.drop != 0.0:
            raise InvalidArgumentError("an increased confidence implies zero drop")


@dataclass(frozen=True)
class AggregateScores:
    avg_drop_pct: float
    iic_pct: float
    pointing_pct: Optional[float]
    n_valid: int
    n_hits_evaluated: int


def mask_image(image: ImageTensor, smap: SaliencyMap) -> ImageTensor:
    """Element-wise product of map and image, dimming pixels by their relevance."""
    if image.space is not ColorSpace.RAW01:
        raise InvalidArgumentError("masking operates on raw [0,1] images")
    if (smap.height, smap.width) != (image.height, image.width):
        raise InvalidArgumentError("saliency map dims must match the image")
    if not smap.postprocessed:
        raise InvalidStateError("mask_image expects a postprocessed map")
    return ImageTensor(image.data * smap.data[:, :, None], ColorSpace.RAW01)


def average_drop(orig: float, masked: float) -> DropResult:
    """Relative score drop max(0, orig - masked) / orig and the increase flag."""
    if not (0.0 <= orig <= 1.0 and 0.0 <= masked <= 1.0):
        raise InvalidArgumentError("scores must lie in [0, 1]")
    if orig == 0.0:
        raise UndefinedDropError("original score is zero; drop is undefined for this sample")
    drop = max(0.0, orig - masked) / orig
    return DropResult(drop, masked > orig)


def binarize(smap: SaliencyMap, percentile: float) -> SaliencyMap:
    """Threshold at the given percentile of the map's own values (linear interpolation).

    Pixels >= the threshold become 1, the rest 0; a constant map maps to all ones.
    """
    if not smap.postprocessed:
        raise InvalidStateError("binarize expects a postprocessed map")
    if not 0.0 <= percentile < 100.0:
        raise InvalidArgumentError("percentile must lie in [0, 100)")
    values = smap.data.astype(np.float64)
    threshold = np.percentile(values, percentile, method="linear")
    return SaliencyMap((values >= threshold).astype(np.float32), postprocessed=True)


def argmax_position(smap: SaliencyMap):
    """Row/column of the map's maximum, ties broken row-major."""
    flat_index = int(np.argmax(smap.data))
    return divmod(flat_index, smap.width)


def pointing_game(smap: SaliencyMap, boxes: Sequence[BoundingBox], target: int) -> bool:
    """Hit iff the map's highest pixel falls inside any ground-truth box of the target class."""
    candidates = [b for b in boxes if b.class_id == target]
    if not candidates:
        raise MissingAnnotationError(f"no bounding box annotated for class {target}")
    for box in candidates:
        if box.x_max >= smap.width or box.y_max >= smap.height:
            raise InvalidArgumentError(
                f"box {box} exceeds map bounds {smap.height}x{smap.width}"
            )
    row, col = argmax_position(smap)
    return any(box.contains(row, col) for box in candidates)


def aggregate(
    drop_results: Sequence[DropResult], hits: Optional[Sequence[bool]] = None
) -> AggregateScores:
    """Dataset-level percentages; samples with undefined drop are excluded upstream."""
    drops = list(drop_results)
    if not drops:
        raise EmptyAggregateError("no valid samples to aggregate")
    avg_drop = 100.0 * float(np.mean([d.drop for d in drops]))
    iic = 100.0 * float(np.mean([d.confidence_increased for d in drops]))
    pointing = None
    n_hits = 0
    if hits is not None:
        hits = list(hits)
        if not hits:
            raise EmptyAggregateError("no pointing-game samples to aggregate")
        pointing = 100.0 * float(np.mean([bool(h) for h in hits]))
        n_hits = len(hits)
    return AggregateScores(avg_drop, iic, pointing, len(drops), n_hits)

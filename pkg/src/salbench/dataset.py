"""Dataset manifest loading, image decoding, and bounding-box ingestion."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import ColorSpace, ImageTensor, resize_bilinear
from .errors import IngestError
from .pointmetrics import BoundingBox

_ALLOWED_FORMATS = {"PNG", "PPM"}


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: Path
    label: int


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple
    bbox_path: Optional[Path] = None


@dataclass(frozen=True)
class Sample:
    image_id: str
    image: ImageTensor
    label: int
    boxes: tuple


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a JSON dataset manifest; all referenced files must exist."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise IngestError(f"manifest {path} must be an object with an 'entries' list")
    root = path.parent / doc.get("root", ".")
    entries = []
    seen = set()
    for raw in doc["entries"]:
        try:
            entry = ManifestEntry(str(raw["image_id"]), root / raw["path"], int(raw["label"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"bad manifest entry {raw!r}: {exc}") from exc
        if entry.image_id in seen:
            raise IngestError(f"duplicate image_id {entry.image_id!r}")
        seen.add(entry.image_id)
        if not entry.path.is_file():
            raise IngestError(f"entry {entry.image_id!r}: missing file {entry.path}")
        entries.append(entry)
    bbox_path = None
    if doc.get("bboxes") is not None:
        bbox_path = root / doc["bboxes"]
        if not bbox_path.is_file():
            raise IngestError(f"missing bounding-box file {bbox_path}")
    return DatasetManifest(root=root, entries=tuple(entries), bbox_path=bbox_path)


def load_image(path) -> ImageTensor:
    """Decode a PNG or binary PPM file into a raw [0,1] RGB image."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format not in _ALLOWED_FORMATS:
                raise IngestError(f"{path}: format {img.format} not supported (PNG/PPM only)")
            rgb = img.convert("RGB")
            data = np.asarray(rgb, dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise IngestError(f"cannot decode image {path}: {exc}") from exc
    return ImageTensor(data, ColorSpace.RAW01)


def load_bboxes(path) -> dict:
    """Read `image_id,class_id,x_min,y_min,x_max,y_max` rows into per-image box lists."""
    path = Path(path)
    boxes: dict = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["image_id", "class_id", "x_min", "y_min", "x_max", "y_max"]:
                raise IngestError(f"{path}: unexpected bounding-box CSV header {header}")
            for row in reader:
                if not row:
                    continue
                image_id = row[0]
                box = BoundingBox(int(row[1]), int(row[2]), int(row[3]), int(row[4]), int(row[5]))
                boxes.setdefault(image_id, []).append(box)
    except (OSError, ValueError, IndexError) as exc:
        raise IngestError(f"cannot read bounding boxes {path}: {exc}") from exc
    return {image_id: tuple(lst) for image_id, lst in boxes.items()}


def ingest(manifest: DatasetManifest, size=(224, 224)) -> list:
    """Load, resize, and order all samples by image_id (deterministic iteration)."""
    boxes = load_bboxes(manifest.bbox_path) if manifest.bbox_path else {}
    samples = []
    for entry in sorted(manifest.entries, key=lambda e: e.image_id):
        image = load_image(entry.path)
        if (image.height, image.width) != tuple(size):
            image = resize_bilinear(image, size[0], size[1])
        samples.append(
            Sample(entry.image_id, image, entry.label, boxes.get(entry.image_id, ()))
        )
    return samples

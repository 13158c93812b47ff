"""Dataset manifest consumption: decode, resize, and normalize images for the models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from .modelzoo import ILSVRC_MEAN, ILSVRC_STD, ExportError

_ALLOWED_FORMATS = {"PNG", "PPM"}


@dataclass(frozen=True)
class Entry:
    image_id: str
    path: Path
    label: int


def load_manifest(path) -> list:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ExportError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise ExportError(f"manifest {path} must be an object with an 'entries' list")
    root = path.parent / doc.get("root", ".")
    entries = []
    seen = set()
    for raw in doc["entries"]:
        try:
            entry = Entry(str(raw["image_id"]), root / raw["path"], int(raw["label"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ExportError(f"bad manifest entry {raw!r}: {exc}") from exc
        if entry.image_id in seen:
            raise ExportError(f"duplicate image_id {entry.image_id!r}")
        seen.add(entry.image_id)
        if not entry.path.is_file():
            raise ExportError(f"entry {entry.image_id!r}: missing file {entry.path}")
        entries.append(entry)
    return sorted(entries, key=lambda e: e.image_id)


def load_raw_image(path, size: int = 224) -> torch.Tensor:
    """Decode PNG/PPM into a (1, 3, size, size) raw [0,1] tensor."""
    try:
        with Image.open(path) as img:
            if img.format not in _ALLOWED_FORMATS:
                raise ExportError(f"{path}: format {img.format} not supported (PNG/PPM only)")
            data = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise ExportError(f"cannot decode image {path}: {exc}") from exc
    tensor = torch.from_numpy(data).permute(2, 0, 1)[None]
    if tensor.shape[2:] != (size, size):
        tensor = F.interpolate(tensor, size=(size, size), mode="bilinear", align_corners=False)
    return tensor


def normalize(raw: torch.Tensor) -> torch.Tensor:
    mean = torch.tensor(ILSVRC_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(ILSVRC_STD).view(1, 3, 1, 1)
    return (raw - mean) / std

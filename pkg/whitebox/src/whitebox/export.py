"""Export jobs: run one attribution method over a dataset and emit SMAP files."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from . import smapio
from .dataset import load_manifest, load_raw_image, normalize
from .methods import gradcam, integrated_gradients, smoothgrad
from .modelzoo import ExportError, load_model

METHODS = ("ig", "smoothgrad", "gradcam")


@dataclass(frozen=True)
class ExportJob:
    model_id: str
    method: str
    manifest_path: str
    out_dir: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ExportError(f"unknown method {self.method!r} (want {'/'.join(METHODS)})")
        params = dict(self.params)
        if self.method == "ig":
            params = {"steps": int(params.get("steps", 64))}
            if params["steps"] < 1:
                raise ExportError("ig needs steps >= 1")
        elif self.method == "smoothgrad":
            params = {
                "n_samples": int(params.get("n_samples", 25)),
                "noise_sigma": float(params.get("noise_sigma", 0.15)),
                "seed": int(params.get("seed", 0)),
                "signed": bool(params.get("signed", False)),
            }
            if params["n_samples"] < 1 or params["noise_sigma"] < 0:
                raise ExportError("smoothgrad needs n_samples >= 1 and noise_sigma >= 0")
        else:
            params = {}
        object.__setattr__(self, "params", params)


def run_export(job: ExportJob) -> dict:
    """Produce `<image_id>.<method>.smap` for every manifest entry, plus a job manifest."""
    bundle = load_model(job.model_id)
    entries = load_manifest(job.manifest_path)
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for entry in entries:
        raw = load_raw_image(entry.path)
        x = normalize(raw) if bundle.input_space == "normalized" else raw
        if job.method == "ig":
            grid = integrated_gradients(bundle.model, x, entry.label, job.params["steps"])
        elif job.method == "smoothgrad":
            seed = job.params["seed"] ^ zlib.crc32(entry.image_id.encode())
            grid = smoothgrad(
                bundle.model,
                x,
                entry.label,
                n_samples=job.params["n_samples"],
                noise_sigma=job.params["noise_sigma"],
                seed=seed,
                signed=job.params["signed"],
            )
        else:
            grid = gradcam(bundle.model, bundle.gradcam_layer, x, entry.label)
        smapio.write(smapio.postprocess(grid), out_dir / f"{entry.image_id}.{job.method}.smap")

    manifest = {
        "model": job.model_id,
        "method": job.method,
        "params": job.params,
        "dataset": str(job.manifest_path),
        "n_maps": len(entries),
    }
    (out_dir / f"export_{job.method}.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    return manifest

"""Run orchestration: config resolution, map generation, metric evaluation, reports.

Every non-default parameter is materialized into the run manifest, per-sample
failures are logged and excluded (never imputed), and all artifacts are written
in deterministic order so reruns with equal seeds are byte-identical regardless
of worker count.
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import ImageTensor, NormalizationSpec, SaliencyMap
from .dataset import ingest, load_manifest
from .errors import (
    ConfigError,
    FormatError,
    MissingAnnotationError,
    SalbenchError,
    UndefinedDropError,
)
from .faithfulness import (
    BlurBaseline,
    DatasetMeanBaseline,
    PixelGranularity,
    RegionGranularity,
    UniformNoiseBaseline,
    auc,
    baseline_label,
    curve_to_csv,
    deletion_curve,
    granularity_label,
    insertion_curve,
)
from .models import ConstantModel, ModelAdapter, RegionMeanModel, score_raw_vectors
from .pointmetrics import average_drop, binarize, mask_image, pointing_game
from .protocol import RemoteScorer
from .road import ImputationConfig, road_score
from .saliency import OcclusionConfig, RiseConfig, occlusion, postprocess, rise, sparsity_kde
from .sanity import (
    MetricSeries,
    Polarity,
    SeriesKind,
    inter_method,
    internal_consistency,
    mean_tables,
)
from .smap import load_smap, save_smap

SCORER_ENV = "SJ_SCORER"

_DEFAULT_INSDEL_CONFIGS = [
    {"baseline": {"kind": "mean"}, "granularity": {"kind": "pixel"}},
]

# Orientation and kind of every per-sample metric series the pipeline emits.
METRIC_TRAITS = {
    "insertion": (Polarity.HIGHER_BETTER, SeriesKind.CONTINUOUS),
    "deletion": (Polarity.LOWER_BETTER, SeriesKind.CONTINUOUS),
    "avg_drop": (Polarity.LOWER_BETTER, SeriesKind.CONTINUOUS),
    "iic": (Polarity.HIGHER_BETTER, SeriesKind.BINARY),
    "pointing": (Polarity.HIGHER_BETTER, SeriesKind.BINARY),
    "road": (Polarity.LOWER_BETTER, SeriesKind.CONTINUOUS),
}


@dataclass(frozen=True)
class MetricRecord:
    """One per-sample metric outcome plus its configuration fingerprint."""

    image_id: str
    method: str
    metric: str
    config: str
    value: float


@dataclass(frozen=True)
class Exclusion:
    image_id: str
    method: str
    metric: str
    reason: str


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _as_mapping(doc, name: str) -> dict:
    _require(isinstance(doc, dict), f"{name} must be a JSON object")
    return doc


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return _as_mapping(doc, "config")


def parse_baseline(doc: dict):
    doc = _as_mapping(doc, "baseline")
    kind = doc.get("kind")
    if kind == "mean":
        values = doc.get("values", list(NormalizationSpec().mean))
        return DatasetMeanBaseline(mean=tuple(float(v) for v in values))
    if kind == "blur":
        return BlurBaseline(int(doc.get("kernel_size", 11)), float(doc.get("sigma", 5.0)))
    if kind == "uniform":
        return UniformNoiseBaseline(int(doc.get("seed", 0)))
    raise ConfigError(f"unknown baseline kind {kind!r} (want mean/blur/uniform)")


def parse_granularity(doc: dict):
    doc = _as_mapping(doc, "granularity")
    kind = doc.get("kind")
    if kind == "pixel":
        return PixelGranularity()
    if kind == "region":
        return RegionGranularity(int(doc.get("radius", 4)))
    raise ConfigError(f"unknown granularity kind {kind!r} (want pixel/region)")


def config_label(baseline, granularity) -> str:
    return f"{baseline_label(baseline)}+{granularity_label(granularity)}"


class _ThreadLocalRemote(ModelAdapter):
    """One scorer connection per worker thread (protocol allows one in-flight request)."""

    def __init__(self, endpoint: str, timeout: float):
        self._endpoint = endpoint
        self._timeout = timeout
        self._local = threading.local()
        probe = self._scorer()  # handshake eagerly so config errors surface now
        self.n_classes = probe.n_classes
        self.input_space = probe.input_space
        self.deterministic = probe.deterministic

    def _scorer(self) -> RemoteScorer:
        scorer = getattr(self._local, "scorer", None)
        if scorer is None:
            scorer = RemoteScorer(self._endpoint, timeout=self._timeout)
            self._local.scorer = scorer
        return scorer

    def score_batch(self, req):
        return self._scorer().score_batch(req)


def build_model(doc: dict) -> ModelAdapter:
    doc = _as_mapping(doc, "model")
    kind = doc.get("kind")
    if kind == "region-mean":
        region = doc.get("region")
        _require(isinstance(region, list) and region, "region-mean model needs a pixel list")
        return RegionMeanModel(
            region=tuple((int(r), int(c)) for r, c in region),
            n_classes=int(doc.get("n_classes", 2)),
        )
    if kind == "constant":
        return ConstantModel(float(doc.get("value", 0.5)), int(doc.get("n_classes", 2)))
    if kind == "remote":
        endpoint = doc.get("endpoint") or os.environ.get(SCORER_ENV)
        _require(bool(endpoint), f"remote model needs 'endpoint' or ${SCORER_ENV}")
        return _ThreadLocalRemote(endpoint, float(doc.get("timeout", 30.0)))
    raise ConfigError(f"unknown model kind {kind!r} (want region-mean/constant/remote)")


def _sample_seed(seed: int, image_id: str, salt: str = "") -> int:
    return (int(seed) << 32) ^ zlib.crc32(f"{salt}:{image_id}".encode())


def _resolve_common(doc: dict) -> dict:
    resolved = {
        "dataset": doc.get("dataset"),
        "model": _as_mapping(doc.get("model", {"kind": "constant"}), "model"),
        "class_policy": doc.get("class_policy", "label"),
        "seed": int(doc.get("seed", 0)),
        "workers": int(doc.get("workers", 1)),
        "batch_size": int(doc.get("batch_size", 32)),
        "normalization": {
            "mean": list(doc.get("normalization", {}).get("mean", NormalizationSpec().mean)),
            "std": list(doc.get("normalization", {}).get("std", NormalizationSpec().std)),
        },
        "resize": list(doc.get("resize", (224, 224))),
    }
    _require(resolved["dataset"] is not None, "config needs a 'dataset' manifest path")
    _require(resolved["class_policy"] in ("label", "predicted"), "class_policy must be label|predicted")
    _require(resolved["workers"] >= 1, "workers must be >= 1")
    _require(resolved["batch_size"] >= 1, "batch_size must be >= 1")
    return resolved


def resolve_generate_config(doc: dict) -> dict:
    resolved = _resolve_common(doc)
    methods = _as_mapping(doc.get("methods", {}), "methods")
    _require(bool(methods), "generate config selects zero methods")
    out = {}
    for name, params in methods.items():
        params = _as_mapping(params if params is not None else {}, f"methods.{name}")
        if name == "rise":
            out[name] = {
                "n_masks": int(params.get("n_masks", 4000)),
                "grid_h": int(params.get("grid_h", 7)),
                "grid_w": int(params.get("grid_w", 7)),
                "keep_prob": float(params.get("keep_prob", 0.5)),
            }
        elif name == "occlusion":
            out[name] = {
                "window": int(params.get("window", 16)),
                "stride": int(params.get("stride", 8)),
                "fill": float(params.get("fill", 0.0)),
            }
        else:
            raise ConfigError(f"unknown generation method {name!r} (want rise/occlusion)")
    resolved["methods"] = out
    return resolved


def resolve_evaluate_config(doc: dict) -> dict:
    resolved = _resolve_common(doc)
    resolved["maps_dir"] = doc.get("maps_dir")
    _require(resolved["maps_dir"] is not None, "evaluate config needs 'maps_dir'")
    resolved["methods"] = list(doc.get("methods", []))
    metrics = _as_mapping(doc.get("metrics", {}), "metrics")
    _require(bool(metrics), "config selects zero metrics")
    known = {"average_drop", "pointing", "insertion", "deletion", "road", "kde"}
    unknown = set(metrics) - known
    _require(not unknown, f"unknown metrics {sorted(unknown)} (want {sorted(known)})")
    out = {}
    for name in sorted(metrics):
        params = _as_mapping(metrics[name] if metrics[name] is not None else {}, f"metrics.{name}")
        if name == "average_drop":
            out[name] = {
                "binarize_percentiles": [float(p) for p in params.get("binarize_percentiles", [])]
            }
        elif name == "pointing":
            out[name] = {}
        elif name in ("insertion", "deletion"):
            configs = params.get("configs", _DEFAULT_INSDEL_CONFIGS)
            _require(isinstance(configs, list) and configs, f"{name} needs at least one config")
            parsed = []
            for c in configs:
                c = _as_mapping(c, f"{name} config")
                baseline = parse_baseline(c.get("baseline", {"kind": "mean"}))
                granularity = parse_granularity(c.get("granularity", {"kind": "pixel"}))
                parsed.append({"baseline": baseline, "granularity": granularity})
            labels = [config_label(c["baseline"], c["granularity"]) for c in parsed]
            _require(len(labels) == len(set(labels)), f"duplicate {name} config labels {labels}")
            out[name] = {
                "configs": parsed,
                "step_fraction": float(params.get("step_fraction", 0.01)),
                "noise_repeats": int(params.get("noise_repeats", 5)),
                "emit_curves": bool(params.get("emit_curves", True)),
            }
        elif name == "road":
            out[name] = {
                "fractions": [float(f) for f in params.get("fractions", [round(0.1 * k, 1) for k in range(1, 10)])],
                "noise_std": float(params.get("noise_std", 0.01)),
                "direct_weight": float(params.get("direct_weight", 2.0)),
                "diagonal_weight": float(params.get("diagonal_weight", 1.0)),
                "solver_tol": float(params.get("solver_tol", 1e-5)),
            }
        elif name == "kde":
            out[name] = {
                "bandwidth": float(params.get("bandwidth", 0.05)),
                "n_points": int(params.get("n_points", 201)),
            }
    resolved["metrics"] = out
    return resolved


def _serialize_metric_config(metrics: dict) -> dict:
    doc = {}
    for name, params in metrics.items():
        if name in ("insertion", "deletion"):
            doc[name] = dict(params)
            doc[name]["configs"] = [
                {
                    "baseline": _baseline_doc(c["baseline"]),
                    "granularity": _granularity_doc(c["granularity"]),
                }
                for c in params["configs"]
            ]
        else:
            doc[name] = dict(params)
    return doc


def _baseline_doc(baseline) -> dict:
    if isinstance(baseline, DatasetMeanBaseline):
        return {"kind": "mean", "values": list(baseline.mean)}
    if isinstance(baseline, BlurBaseline):
        return {"kind": "blur", "kernel_size": baseline.kernel_size, "sigma": baseline.sigma}
    return {"kind": "uniform", "seed": baseline.seed}


def _granularity_doc(granularity) -> dict:
    if isinstance(granularity, PixelGranularity):
        return {"kind": "pixel"}
    return {"kind": "region", "radius": granularity.radius}


def _norm_spec(resolved: dict) -> NormalizationSpec:
    return NormalizationSpec(
        tuple(resolved["normalization"]["mean"]), tuple(resolved["normalization"]["std"])
    )


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_manifest(out_dir: Path, resolved_doc: dict, exclusions, started: float) -> None:
    # Worker count cannot affect emitted values, so it lives with the timing
    # info; determinism comparisons ignore the whole execution block.
    resolved_doc = dict(resolved_doc)
    workers = resolved_doc.pop("workers", 1)
    manifest = {
        "tool_version": __version__,
        "config": resolved_doc,
        "exclusions": [
            {"image_id": e.image_id, "method": e.method, "metric": e.metric, "reason": e.reason}
            for e in sorted(exclusions, key=lambda e: (e.image_id, e.method, e.metric))
        ],
        "n_exclusions": len(exclusions),
        "execution": {
            "workers": workers,
            "started_at": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
            "duration_s": round(time.time() - started, 3),
        },
    }
    _write_json(out_dir / "run_manifest.json", manifest)


def _map_path(maps_dir: Path, image_id: str, method: str) -> Path:
    return maps_dir / f"{image_id}.{method}.smap"


def generate_maps(config: dict, out_dir) -> dict:
    """Produce RISE/occlusion maps for every dataset sample as SMAP files."""
    started = time.time()
    resolved = resolve_generate_config(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = ingest(load_manifest(resolved["dataset"]), size=tuple(resolved["resize"]))
    model = build_model(resolved["model"])
    norm = _norm_spec(resolved)
    seed = resolved["seed"]
    batch = resolved["batch_size"]

    def run_one(task):
        sample, method = task
        target = _select_target(model, sample, resolved["class_policy"], norm, batch)
        params = resolved["methods"][method]
        if method == "rise":
            cfg = RiseConfig(
                n_masks=params["n_masks"],
                grid_h=params["grid_h"],
                grid_w=params["grid_w"],
                keep_prob=params["keep_prob"],
                seed=_sample_seed(seed, sample.image_id, "rise"),
            )
            raw = rise(model, sample.image, cfg, target, norm, batch)
        else:
            cfg = OcclusionConfig(params["window"], params["stride"], params["fill"])
            raw = occlusion(model, sample.image, cfg, target, norm, batch)
        return sample.image_id, method, postprocess(raw)

    tasks = [(s, m) for s in samples for m in sorted(resolved["methods"])]
    with ThreadPoolExecutor(max_workers=resolved["workers"]) as pool:
        results = list(pool.map(run_one, tasks))
    for image_id, method, smap in sorted(results, key=lambda r: (r[0], r[1])):
        save_smap(smap, _map_path(out_dir, image_id, method))
    _write_manifest(out_dir, {**resolved, "command": "generate"}, [], started)
    return {"n_maps": len(results), "n_exclusions": 0}


def _select_target(model, sample, policy: str, norm, batch_size: int) -> int:
    if policy == "label":
        return sample.label
    vectors = score_raw_vectors(model, sample.image.data[None], 0, norm, batch_size)
    return int(np.argmax(vectors[0]))


def _evaluate_sample(model, sample, smap, resolved, norm):
    """All enabled metrics for one (sample, map) pair; returns records, curves, exclusions."""
    records, curves, exclusions = [], {}, []
    metrics = resolved["metrics"]
    batch = resolved["batch_size"]
    seed = resolved["seed"]
    target = _select_target(model, sample, resolved["class_policy"], norm, batch)
    image_id = sample.image_id

    orig = float(score_raw_vectors(model, sample.image.data[None], target, norm, batch)[0, target])

    if "average_drop" in metrics:
        variants = [("real", smap)]
        for p in metrics["average_drop"]["binarize_percentiles"]:
            variants.append((f"bin{p:g}", binarize(smap, p)))
        for label, variant in variants:
            masked_img = mask_image(sample.image, variant)
            masked = float(
                score_raw_vectors(model, masked_img.data[None], target, norm, batch)[0, target]
            )
            try:
                result = average_drop(orig, masked)
            except UndefinedDropError:
                exclusions.append(Exclusion(image_id, "", "avg_drop", "zero original score"))
                continue
            records.append(MetricRecord(image_id, "", "avg_drop", label, result.drop))
            records.append(
                MetricRecord(image_id, "", "iic", label, float(result.confidence_increased))
            )

    if "pointing" in metrics:
        try:
            hit = pointing_game(smap, sample.boxes, target)
            records.append(MetricRecord(image_id, "", "pointing", "default", float(hit)))
        except MissingAnnotationError:
            exclusions.append(Exclusion(image_id, "", "pointing", "no annotation for class"))

    for metric in ("insertion", "deletion"):
        if metric not in metrics:
            continue
        params = metrics[metric]
        curve_fn = insertion_curve if metric == "insertion" else deletion_curve
        for cfg in params["configs"]:
            label = config_label(cfg["baseline"], cfg["granularity"])
            baseline = cfg["baseline"]
            if isinstance(baseline, UniformNoiseBaseline):
                aucs = []
                first_curve = None
                for repeat in range(params["noise_repeats"]):
                    seeded = UniformNoiseBaseline(
                        _sample_seed(seed + repeat, image_id, f"{metric}:{label}")
                    )
                    curve = curve_fn(
                        model, sample.image, smap, seeded, cfg["granularity"],
                        params["step_fraction"], target, norm, batch,
                    )
                    aucs.append(auc(curve))
                    first_curve = first_curve or curve
                value, curve = float(np.mean(aucs)), first_curve
            else:
                curve = curve_fn(
                    model, sample.image, smap, baseline, cfg["granularity"],
                    params["step_fraction"], target, norm, batch,
                )
                value = auc(curve)
            records.append(MetricRecord(image_id, "", metric, label, value))
            if params["emit_curves"]:
                curves[(metric, label)] = curve

    if "road" in metrics:
        params = metrics["road"]
        cfg = ImputationConfig(
            direct_weight=params["direct_weight"],
            diagonal_weight=params["diagonal_weight"],
            noise_std=params["noise_std"],
            solver_tol=params["solver_tol"],
        )
        value = road_score(
            model, sample.image, smap, params["fractions"], cfg, target,
            seed=_sample_seed(seed, image_id, "road"), norm=norm, batch_size=batch,
        )
        records.append(MetricRecord(image_id, "", "road", "road", value))

    return records, curves, exclusions


def run_pipeline(config: dict, maps_dir, out_dir) -> dict:
    """Evaluate every selected metric over the dataset and emit the report directory."""
    started = time.time()
    resolved = resolve_evaluate_config({**config, "maps_dir": str(maps_dir)})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    maps_root = Path(resolved["maps_dir"])
    samples = ingest(load_manifest(resolved["dataset"]), size=tuple(resolved["resize"]))
    model = build_model(resolved["model"])
    norm = _norm_spec(resolved)

    methods = resolved["methods"] or sorted(
        {p.name.split(".")[-2] for p in maps_root.glob("*.smap") if len(p.name.split(".")) >= 3}
    )
    _require(bool(methods), f"no saliency maps found under {maps_root}")

    tasks = []
    exclusions = []
    for sample in samples:
        for method in methods:
            path = _map_path(maps_root, sample.image_id, method)
            if not path.is_file():
                exclusions.append(Exclusion(sample.image_id, method, "*", "missing saliency map"))
                continue
            tasks.append((sample, method, path))

    def run_one(task):
        sample, method, path = task
        try:
            smap = load_smap(path)
            records, curves, errs = _evaluate_sample(model, sample, smap, resolved, norm)
        except (SalbenchError, FormatError) as exc:
            return (
                [],
                {},
                [Exclusion(sample.image_id, method, "*", f"{type(exc).__name__}: {exc}")],
                sample.image_id,
                method,
                None,
            )
        records = [MetricRecord(r.image_id, method, r.metric, r.config, r.value) for r in records]
        errs = [Exclusion(e.image_id, method, e.metric, e.reason) for e in errs]
        return records, curves, errs, sample.image_id, method, smap

    all_records = []
    maps_by_method = {m: [] for m in methods}
    curve_payloads = []
    with ThreadPoolExecutor(max_workers=resolved["workers"]) as pool:
        for records, curves, errs, image_id, method, smap in pool.map(run_one, tasks):
            all_records.extend(records)
            exclusions.extend(errs)
            if smap is not None:
                maps_by_method[method].append((image_id, smap))
            for (metric, label), curve in curves.items():
                curve_payloads.append((method, metric, label, image_id, curve_to_csv(curve)))

    all_records.sort(key=lambda r: (r.method, r.metric, r.config, r.image_id))
    _write_records(out_dir / "records.csv", all_records)

    for method, metric, label, image_id, payload in sorted(curve_payloads, key=lambda p: p[:4]):
        directory = out_dir / "curves" / method / f"{metric}_{label}"
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{image_id}.csv").write_text(payload)

    if "kde" in resolved["metrics"]:
        params = resolved["metrics"]["kde"]
        kde_dir = out_dir / "kde"
        kde_dir.mkdir(parents=True, exist_ok=True)
        for method in methods:
            pairs = sorted(maps_by_method[method])
            if not pairs:
                continue
            curve = sparsity_kde(
                [smap for _, smap in pairs],
                bandwidth=params["bandwidth"],
                eval_points=np.linspace(0.0, 1.0, params["n_points"]),
            )
            rows = ["x,y"] + [
                f"{x:.9g},{y:.9g}" for x, y in zip(curve.eval_points, curve.densities)
            ]
            (kde_dir / f"{method}.csv").write_text("\n".join(rows) + "\n")

    aggregate_doc = _aggregate(all_records, methods, resolved)
    _write_json(out_dir / "aggregate.json", aggregate_doc)
    (out_dir / "aggregate.csv").write_text(_aggregate_csv(aggregate_doc))

    _emit_correlation_tables(all_records, methods, out_dir / "correlations")

    resolved_doc = {
        **resolved,
        "metrics": _serialize_metric_config(resolved["metrics"]),
        "methods": methods,
        "command": "evaluate",
    }
    _write_manifest(out_dir, resolved_doc, exclusions, started)
    return {"n_records": len(all_records), "n_exclusions": len(exclusions)}


def _write_records(path: Path, records) -> None:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["image_id", "method", "metric", "config", "value"])
    for r in records:
        writer.writerow([r.image_id, r.method, r.metric, r.config, f"{r.value:.9g}"])
    path.write_text(out.getvalue())


def read_records(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            MetricRecord(
                row["image_id"], row["method"], row["metric"], row["config"], float(row["value"])
            )
            for row in reader
        ]


def _default_config_label(records, method: str, metric: str):
    labels = sorted({r.config for r in records if r.method == method and r.metric == metric})
    return labels[0] if labels else None


def _metric_values(records, method: str, metric: str, config: str) -> dict:
    return {
        r.image_id: r.value
        for r in records
        if r.method == method and r.metric == metric and r.config == config
    }


def _aggregate(records, methods, resolved) -> dict:
    doc = {"methods": {}}
    for method in methods:
        entry = {}
        drops = _metric_values(records, method, "avg_drop", "real")
        if drops:
            entry["avg_drop_pct"] = round(100.0 * float(np.mean(sorted(drops.values()))), 4)
        increases = _metric_values(records, method, "iic", "real")
        if increases:
            entry["iic_pct"] = round(100.0 * float(np.mean(sorted(increases.values()))), 4)
        hits = _metric_values(records, method, "pointing", "default")
        if hits:
            entry["pointing_pct"] = round(100.0 * float(np.mean(sorted(hits.values()))), 4)
        roads = _metric_values(records, method, "road", "road")
        if roads:
            entry["road"] = round(float(np.mean(sorted(roads.values()))), 6)
        for metric in ("insertion", "deletion"):
            labels = sorted({r.config for r in records if r.method == method and r.metric == metric})
            for label in labels:
                values = _metric_values(records, method, metric, label)
                entry[f"{metric}_auc[{label}]"] = round(float(np.mean(sorted(values.values()))), 6)
        doc["methods"][method] = entry
    return doc


def _aggregate_csv(doc: dict) -> str:
    methods = sorted(doc["methods"])
    rows = sorted({key for m in methods for key in doc["methods"][m]})
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["metric"] + methods)
    for row in rows:
        writer.writerow([row] + [doc["methods"][m].get(row, "") for m in methods])
    return out.getvalue()


def _series_from_values(metric: str, label: str, values: dict) -> MetricSeries:
    polarity, kind = METRIC_TRAITS[metric]
    ids = tuple(sorted(values))
    data = np.array([values[i] for i in ids], dtype=np.float32)
    return MetricSeries(f"{label}", polarity, data, kind, ids)


def _emit_correlation_tables(records, methods, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    # Internal consistency: one table per method per multi-config metric, plus the mean.
    for metric in ("insertion", "deletion"):
        per_method = []
        for method in methods:
            labels = sorted({r.config for r in records if r.method == method and r.metric == metric})
            if len(labels) < 2:
                continue
            series = []
            common = None
            for label in labels:
                values = _metric_values(records, method, metric, label)
                common = set(values) if common is None else common & set(values)
            if not common or len(common) < 3:
                continue
            for label in labels:
                values = _metric_values(records, method, metric, label)
                series.append(
                    _series_from_values(metric, label, {i: values[i] for i in common})
                )
            table = internal_consistency(series)
            per_method.append(table)
            _write_table(out_dir, f"internal_{metric}_{method}", table)
        if per_method:
            _write_table(out_dir, f"internal_{metric}_mean", mean_tables(per_method))

    # Inter-method reliability over each metric's default configuration.
    pair_doc = {}
    for method in methods:
        series = {}
        for metric in ("insertion", "deletion", "avg_drop", "pointing", "road"):
            label = _default_config_label(records, method, metric)
            if label is None:
                continue
            values = _metric_values(records, method, metric, label)
            if len(values) >= 3:
                series[metric] = values
        names = sorted(series)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                common = sorted(set(series[a]) & set(series[b]))
                if len(common) < 3:
                    continue
                sa = _series_from_values(a, a, {k: series[a][k] for k in common})
                sb = _series_from_values(b, b, {k: series[b][k] for k in common})
                try:
                    result = inter_method(sa, sb)
                except SalbenchError:
                    continue
                pair_doc.setdefault(f"{a} & {b}", {})[method] = {
                    "fixed": round(result.fixed, 4),
                    "raw": round(result.raw, 4),
                }
    if pair_doc:
        _write_json(out_dir / "inter_method.json", pair_doc)
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["pair"] + sorted(methods))
        for pair in sorted(pair_doc):
            row = [pair]
            for method in sorted(methods):
                cell = pair_doc[pair].get(method)
                row.append("" if cell is None else f"{cell['fixed']:.4f}")
            writer.writerow(row)
        (out_dir / "inter_method.csv").write_text(out.getvalue())


def _write_table(out_dir: Path, name: str, table) -> None:
    (out_dir / f"{name}.csv").write_text(table.to_csv())
    _write_json(out_dir / f"{name}.json", table.to_json_dict())


def sanity_from_reports(report_dirs, out_dir) -> dict:
    """Recompute consistency and inter-method tables from one or more report dirs."""
    records = []
    for directory in report_dirs:
        path = Path(directory) / "records.csv"
        _require(path.is_file(), f"no records.csv under {directory}")
        records.extend(read_records(path))
    _require(bool(records), "no records found in the given reports")
    methods = sorted({r.method for r in records})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _emit_correlation_tables(records, methods, out_dir)
    return {"n_records": len(records), "n_methods": len(methods)}


def emit_report(in_dir, fmt: str) -> str:
    """Render the aggregate table of a report directory as CSV or JSON text."""
    _require(fmt in ("csv", "json"), "format must be csv or json")
    path = Path(in_dir) / "aggregate.json"
    _require(path.is_file(), f"no aggregate.json under {in_dir}")
    doc = json.loads(path.read_text())
    if fmt == "json":
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    return _aggregate_csv(doc)

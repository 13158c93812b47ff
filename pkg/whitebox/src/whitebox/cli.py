"""CLI: export saliency maps for a dataset, or serve a model over the scorer protocol."""

from __future__ import annotations

import argparse
import sys

from .export import METHODS, ExportJob, run_export
from .modelzoo import ExportError
from .server import serve_scorer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whitebox", description="Gradient-based saliency export and scorer service")
    sub = parser.add_subparsers(dest="command", required=True)

    export = sub.add_parser("export", help="write <image_id>.<method>.smap files for a dataset")
    export.add_argument("--model", default="toy", help="model id (toy/resnet50/vgg16)")
    export.add_argument("--method", required=True, choices=METHODS)
    export.add_argument("--manifest", required=True, help="dataset manifest JSON")
    export.add_argument("--out", required=True, help="output directory")
    export.add_argument("--steps", type=int, default=64, help="integration steps (ig)")
    export.add_argument("--samples", type=int, default=25, help="noisy samples (smoothgrad)")
    export.add_argument("--sigma", type=float, default=0.15, help="noise std (smoothgrad)")
    export.add_argument("--seed", type=int, default=0)
    export.add_argument("--signed", action="store_true", help="signed gradient averaging (smoothgrad)")

    serve = sub.add_parser("serve", help="answer scorer protocol frames for a model")
    serve.add_argument("--model", default="toy", help="model id (toy/resnet50/vgg16)")
    serve.add_argument("--endpoint", required=True, help="tcp:host:port or stdio")
    serve.add_argument("--nondeterministic", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            params = {
                "steps": args.steps,
                "n_samples": args.samples,
                "noise_sigma": args.sigma,
                "seed": args.seed,
                "signed": args.signed,
            }
            job = ExportJob(args.model, args.method, args.manifest, args.out, params)
            manifest = run_export(job)
            print(f"exported {manifest['n_maps']} maps to {args.out}")
            return 0
        serve_scorer(args.model, args.endpoint, deterministic=not args.nondeterministic)
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

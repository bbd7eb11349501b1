"""Command line entry point: ``roadaudit run|validate|evaluate|demo-scene``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .pipeline import ManifestInvalid, OutputError, run, validate

EXIT_OK = 0
EXIT_MANIFEST = 1
EXIT_OUTPUT = 2


def _cmd_run(args) -> int:
    try:
        summary = run(args.manifest, args.output, debug_dir=args.debug_dir, jobs=args.jobs)
    except ManifestInvalid as exc:
        for p in exc.problems:
            print(f"manifest: {p}", file=sys.stderr)
        return EXIT_MANIFEST
    except OutputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_OUTPUT
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_validate(args) -> int:
    problems = validate(args.manifest)
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return EXIT_MANIFEST if problems else EXIT_OK


def _cmd_evaluate(args) -> int:
    from .raster import load_mask
    from .report import detection_map, mask_miou, read_detections

    if args.kind == "detections":
        res = detection_map(read_detections(args.pred), read_detections(args.truth), args.iou)
        out = {"map": res["map"], "per_class": {str(k): v for k, v in res["per_class"].items()}}
    else:
        classes = [int(c) for c in args.classes.split(",")] if args.classes else range(256)
        out = {"miou": mask_miou(load_mask(args.pred), load_mask(args.truth), classes)}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_demo(args) -> int:
    from .synthetic import write_demo_scene

    print(write_demo_scene(args.out_dir))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadaudit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="analyze a scene and write a GeoJSON damage map")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--debug-dir", default=None, help="dump refined/hot/flagged marking masks here")
    p.add_argument("--jobs", type=int, default=1, help="parallel frame workers")
    p.add_argument("--validate-only", action="store_true", help="check the manifest and stop")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a manifest without running it")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("evaluate", help="mAP of detections or mIoU of masks")
    p.add_argument("kind", choices=("detections", "masks"))
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--classes", default=None, help="comma separated class ids (masks)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("demo-scene", help="write the bundled synthetic scene")
    p.add_argument("out_dir")
    p.set_defaults(func=_cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if getattr(args, "validate_only", False):
        return _cmd_validate(args)
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_MANIFEST
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: `setmatch-export`."""
from __future__ import annotations

import argparse
import sys

from .errors import ExporterError
from .export import export_embeddings
from .prompts import descriptor_question


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setmatch-export",
        description="Export EMBA embedding archives from images and prompts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="export an archive")
    run.add_argument("--images", required=True,
                     help="folder with one subdirectory per class")
    run.add_argument("--crop-plan", required=True, help="crop-plan JSON")
    run.add_argument("--descriptors", required=True,
                     help="descriptor JSON ({class: [descriptor, ...]})")
    run.add_argument("--model", default="toy-64", help="backbone id")
    run.add_argument("--out", required=True, help="output archive path")
    run.add_argument("--cross-seed", type=int, default=0,
                     help="seed for cross hybrid borrowings")
    run.add_argument("--donors-per-class", type=int, default=5)

    q = sub.add_parser("question",
                       help="print the descriptor-authoring question")
    q.add_argument("--class-name", required=True)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.command == "question":
            print(descriptor_question(args.class_name))
            return 0
        count = export_embeddings(
            args.images, args.crop_plan, args.descriptors, args.model,
            args.out, cross_seed=args.cross_seed,
            donors_per_class=args.donors_per_class,
        )
        print(f"wrote {count} entries to {args.out}")
        return 0
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

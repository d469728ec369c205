"""Command line interface.

Subcommands:
    run        extract embeddings for a job and write EMB1 + manifest
    backbones  list registry entries with their preprocessing records

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 backbone weights unavailable. Diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import BackboneUnavailableError, ExtractorError
from .jobs import ExtractionJob, extract, load_prompts
from .registry import (
    DEFAULT_IMAGE_BACKBONE,
    DEFAULT_TEXT_BACKBONE,
    list_backbones,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_model_dirs(pairs) -> dict:
    model_images = {}
    for pair in pairs:
        model_id, sep, directory = pair.partition("=")
        if not sep or not model_id or not directory:
            raise ExtractorError(f"--images expects MODEL=DIR, got {pair!r}")
        if model_id in model_images:
            raise ExtractorError(f"duplicate model id {model_id!r}")
        model_images[model_id] = Path(directory)
    return model_images


def _cmd_run(args) -> None:
    job = ExtractionJob(
        prompts=load_prompts(args.prompts),
        model_images=_parse_model_dirs(args.images),
        image_backbone=args.image_backbone,
        text_backbone=args.text_backbone,
        out_dir=Path(args.out),
        reference_images=Path(args.reference) if args.reference else None,
        dataset=args.dataset,
        batch_size=args.batch_size,
        device=args.device,
    )
    manifest = extract(job)
    print(manifest, file=sys.stderr)


def _cmd_backbones(args) -> None:
    for spec in list_backbones():
        size = f", image size {spec.image_size}" if spec.image_size else ""
        sys.stdout.write(
            f"{spec.backbone_id}  [{spec.modality}, dim {spec.feature_dim}{size}]\n"
            f"    {spec.preprocessing}\n"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfred-extract", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"cfred-extract {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="extract embeddings for a job")
    p.add_argument("--prompts", required=True, help="JSON list of {id, text}")
    p.add_argument(
        "--images",
        action="append",
        default=[],
        metavar="MODEL=DIR",
        help="per-model image directory; repeatable",
    )
    p.add_argument("--reference", default=None, help="directory of reference images")
    p.add_argument("--dataset", default="extracted")
    p.add_argument("--image-backbone", default=DEFAULT_IMAGE_BACKBONE)
    p.add_argument("--text-backbone", default=DEFAULT_TEXT_BACKBONE)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("backbones", help="list registered backbones")
    p.set_defaults(func=_cmd_backbones)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except BackboneUnavailableError as exc:
        print(f"cfred-extract: backbone unavailable: {exc}", file=sys.stderr)
        return 3
    except ExtractorError as exc:
        print(f"cfred-extract: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

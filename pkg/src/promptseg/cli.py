"""Command-line entry point.

Subcommands: evaluate, bench-video, render, detect-cache, list-strategies,
protocol-check. Exit codes: 0 success, 1 usage error, 2 runtime failure.
Errors print to stderr as ``promptseg: [tag] message``; every run that
writes a report also writes a ``<name>.config.json`` echo of all effective
parameters. Set PROMPTSEG_LOG=debug|info|warning for log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from . import protocol
from .backends import BackendSpec, ExternalBackend, detect as backend_detect, make_backend
from .bench import (
    BenchReport,
    BoxSource,
    EvalConfig,
    OVERLAY_COLORS,
    emit_report,
    evaluate,
    profile_video,
    render_overlay,
    write_box_cache,
)
from .datasets import load_manifest, load_video, pair_by_stem
from .errors import BackendError, PromptsegError
from .masks import read_image, read_mask
from .prompts import (
    BoundingBox,
    HsvThresholds,
    PromptSet,
    STRATEGIES,
)

log = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 (not argparse's 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"promptseg: [usage] {message}\n")
        raise SystemExit(1)


def _setup_logging() -> None:
    level_name = os.environ.get("PROMPTSEG_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="promptseg: %(levelname)s %(message)s"
    )


def _parse_ranges(text: str, flag: str) -> tuple[tuple[float, float], ...]:
    """Parse "lo-hi[,lo-hi...]" into float pairs."""
    ranges = []
    for item in text.split(","):
        lo, sep, hi = item.partition("-")
        try:
            if not sep:
                raise ValueError
            ranges.append((float(lo), float(hi)))
        except ValueError:
            raise PromptsegError(
                f"{flag} expects LO-HI[,LO-HI...], got {text!r}"
            ) from None
    return tuple(ranges)


def _parse_single_range(text: str, flag: str) -> tuple[float, float]:
    ranges = _parse_ranges(text, flag)
    if len(ranges) != 1:
        raise PromptsegError(f"{flag} takes exactly one LO-HI range, got {text!r}")
    return ranges[0]


def _parse_color(text: str) -> tuple[int, int, int]:
    if text in OVERLAY_COLORS:
        return OVERLAY_COLORS[text]
    parts = text.split(",")
    if len(parts) == 3:
        try:
            rgb = tuple(int(p) for p in parts)
            if all(0 <= v <= 255 for v in rgb):
                return rgb
        except ValueError:
            pass
    names = ", ".join(sorted(OVERLAY_COLORS))
    raise PromptsegError(f"color must be one of {names} or R,G,B; got {text!r}")


def _thresholds_from(args) -> HsvThresholds:
    return HsvThresholds(
        hue_ranges=_parse_ranges(args.hsv_h, "--hsv-h"),
        s_range=_parse_single_range(args.hsv_s, "--hsv-s"),
        v_range=_parse_single_range(args.hsv_v, "--hsv-v"),
    )


def _add_hsv_flags(parser) -> None:
    parser.add_argument(
        "--hsv-h", default="0-65,340-360", help="fire hue ranges in degrees"
    )
    parser.add_argument("--hsv-s", default="0.2-1", help="saturation range")
    parser.add_argument("--hsv-v", default="0.5-1", help="value (brightness) range")


def _add_dataset_flags(parser) -> None:
    parser.add_argument("--manifest", help="JSON-lines dataset manifest")
    parser.add_argument("--images", help="image directory (paired with --masks)")
    parser.add_argument("--masks", help="mask directory (paired with --images)")
    parser.add_argument("--split", default="all", help="manifest split tag to keep")


def _load_dataset(args, parser):
    if args.manifest and (args.images or args.masks):
        parser.error("--manifest and --images/--masks are mutually exclusive")
    if args.manifest:
        data = load_manifest(args.manifest)
    elif args.images and args.masks:
        data = pair_by_stem(args.images, args.masks)
    else:
        parser.error("need --manifest or both --images and --masks")
    return data.with_split(args.split)


def _write_config_echo(out_path: Path, payload: dict) -> Path:
    echo_path = out_path.with_name(out_path.stem + ".config.json")
    echo_path.parent.mkdir(parents=True, exist_ok=True)
    echo_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return echo_path


def _report_format(out_path: Path) -> str:
    return "markdown" if out_path.suffix in (".md", ".markdown") else "csv"


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_evaluate(args, parser) -> int:
    data = _load_dataset(args, parser)
    config = EvalConfig(
        strategy=args.strategy,
        backend=BackendSpec.parse(args.backend, args.model_name),
        box_source=BoxSource.parse(args.box_source),
        thresholds=_thresholds_from(args),
        conf=args.conf,
        mae_scale=args.mae_scale,
        workers=args.workers,
    )
    out_path = Path(args.out)
    partial_path = out_path.with_name(out_path.stem + ".partial.jsonl")
    report = evaluate(config, data, partial_path=partial_path)

    emit_report(report, _report_format(out_path), out_path)
    images_path = out_path.with_name(out_path.stem + ".images.jsonl")
    with open(images_path, "w", encoding="utf-8") as fh:
        for entry, bundle in zip(data.entries, report.per_image):
            record = {"image": str(entry.image_path)}
            record.update(bundle.as_dict())
            fh.write(json.dumps(record) + "\n")
    echo = dict(config.as_dict())
    echo.update(
        {
            "command": "evaluate",
            "manifest": args.manifest,
            "images": args.images,
            "masks": args.masks,
            "split": args.split,
            "out": str(out_path),
            "image_count": report.count,
        }
    )
    echo_path = _write_config_echo(out_path, echo)
    for path in (out_path, images_path, echo_path):
        print(path)
    return 0


def _cmd_bench_video(args, parser) -> int:
    if args.frames_masks and len(args.frames_masks) != len(args.frames):
        parser.error("--frames-masks must be given once per --frames")
    config = EvalConfig(
        strategy=args.strategy,
        backend=BackendSpec.parse(args.backend, args.model_name),
        box_source=BoxSource.parse(args.box_source),
        thresholds=_thresholds_from(args),
        conf=args.conf,
    )
    reports = []
    for i, frames_dir in enumerate(args.frames):
        masks_dir = args.frames_masks[i] if args.frames_masks else None
        video = load_video(frames_dir, masks_dir)
        reports.append(profile_video(config, video, warmup=args.warmup))
    report = BenchReport.merge(reports)

    out_path = Path(args.out)
    emit_report(report, _report_format(out_path), out_path)
    echo = dict(config.as_dict())
    echo.update(
        {
            "command": "bench-video",
            "frames": list(args.frames),
            "frames_masks": list(args.frames_masks or []),
            "warmup": args.warmup,
            "out": str(out_path),
            "frame_count": report.frame_count,
        }
    )
    echo_path = _write_config_echo(out_path, echo)
    for path in (out_path, echo_path):
        print(path)
    return 0


def _cmd_render(args, parser) -> int:
    image = read_image(args.image)
    mask = read_mask(args.mask)
    out = render_overlay(image, mask, _parse_color(args.overlay_color), args.alpha)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(out).save(out_path)
    print(out_path)
    return 0


def _cmd_detect_cache(args, parser) -> int:
    data = _load_dataset(args, parser)
    spec = BackendSpec.parse(args.backend, args.model_name)
    backend = make_backend(spec, _thresholds_from(args))
    records = {}
    try:
        for entry in data:
            image = read_image(entry.image_path)
            key = str(entry.image_path.resolve())
            records[key] = backend_detect(
                backend, image, args.conf, image_path=str(entry.image_path)
            )
    finally:
        backend.close()
    out_path = write_box_cache(records, args.out)
    _write_config_echo(
        out_path,
        {
            "command": "detect-cache",
            "backend": args.backend,
            "conf": args.conf,
            "manifest": args.manifest,
            "images": args.images,
            "masks": args.masks,
            "out": str(out_path),
            "image_count": len(records),
        },
    )
    print(out_path)
    return 0


def _cmd_list_strategies(args, parser) -> int:
    for strategy in STRATEGIES:
        print(strategy)
    return 0


def _cmd_protocol_check(args, parser) -> int:
    """Handshake with an external backend and validate one round-trip."""
    if protocol.dumps(protocol.hello_message()) != protocol.GOLDEN_HELLO:
        raise PromptsegError("client HELLO encoding deviates from golden bytes")
    spec = BackendSpec.parse(args.backend)
    if spec.kind != "external":
        raise BackendError("protocol-check needs an external backend (exec: or tcp:)")
    backend = ExternalBackend(spec.endpoint)
    try:
        backend.connect()
        with tempfile.TemporaryDirectory(prefix="promptseg-") as tmp:
            image_path = Path(tmp) / "check.png"
            rng = np.random.default_rng(0)
            pixels = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(image_path)
            image = read_image(image_path)
            prompt = PromptSet(box=BoundingBox(0, 0, 8, 8, confidence=1.0))
            response = backend.segment(image, prompt, image_path=str(image_path))
            if response.mask.shape != (8, 8):
                raise BackendError("SEGMENT round-trip returned wrong dimensions")
            backend.detect(image, args.conf, image_path=str(image_path))
        print(f"protocol-check ok: model={backend.model_name} version={protocol.PROTOCOL_VERSION}")
    finally:
        backend.close()
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="promptseg",
        description="Promptable fire-segmentation evaluation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def _common_eval_flags(p) -> None:
        p.add_argument("--strategy", default="box", choices=STRATEGIES)
        p.add_argument(
            "--backend",
            default="oracle",
            help="oracle | hsv | exec:CMD | tcp:HOST:PORT",
        )
        p.add_argument("--model-name", default=None, help="label for report rows")
        p.add_argument(
            "--box-source",
            default="detector",
            help="detector | gt[:dilate=K,min_area=A] | file:PATH",
        )
        p.add_argument("--conf", type=float, default=0.3, help="detector confidence threshold")
        _add_hsv_flags(p)

    p = sub.add_parser("evaluate", help="score a strategy/backend over a dataset")
    _add_dataset_flags(p)
    _common_eval_flags(p)
    p.add_argument("--mae-scale", type=float, default=255.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="eval_report.csv")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench-video", help="profile per-frame latency on videos")
    p.add_argument("--frames", action="append", required=True, help="frame directory (repeatable)")
    p.add_argument(
        "--frames-masks",
        action="append",
        help="mask directory matching a --frames (repeatable)",
    )
    _common_eval_flags(p)
    p.add_argument("--warmup", type=int, default=3, help="leading frames excluded from stats")
    p.add_argument("--out", default="bench_report.csv")
    p.set_defaults(func=_cmd_bench_video)

    p = sub.add_parser("render", help="write a mask overlay PNG")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overlay-color", default="green", help="green|red|blue|yellow or R,G,B")
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("detect-cache", help="run a detector once, cache its boxes")
    _add_dataset_flags(p)
    p.add_argument("--backend", required=True, help="exec:CMD | tcp:HOST:PORT")
    p.add_argument("--model-name", default=None)
    p.add_argument("--conf", type=float, default=0.3)
    _add_hsv_flags(p)
    p.add_argument("--out", default="boxes.jsonl")
    p.set_defaults(func=_cmd_detect_cache)

    p = sub.add_parser("list-strategies", help="print the strategy names")
    p.set_defaults(func=_cmd_list_strategies)

    p = sub.add_parser("protocol-check", help="validate an external backend round-trip")
    p.add_argument("--backend", required=True, help="exec:CMD | tcp:HOST:PORT")
    p.add_argument("--conf", type=float, default=0.3)
    p.set_defaults(func=_cmd_protocol_check)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, parser)
    except SystemExit as exc:
        code = exc.code
        return 0 if code is None else int(code)
    except PromptsegError as exc:
        print(f"promptseg: [{exc.tag}] {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"promptseg: [io] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

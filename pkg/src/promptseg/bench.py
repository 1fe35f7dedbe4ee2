"""Evaluation and efficiency-benchmark harness.

`evaluate` scores one (strategy, backend) pair over a dataset: per image it
obtains boxes (detector, ground-truth components, or a cached file), expands
them into prompts, segments once per prompt set, unions the predicted masks
and computes a MetricBundle against ground truth. `profile_video` times the
detect→prompt→segment pipeline per frame over a video sequence. Reports are
emitted as CSV (frozen column sets) or markdown, deterministically: the same
config and data produce byte-identical files.

Timing is wall-clock from a monotonic clock around each round-trip. FPS is
frames / total wall seconds over the measured window, while mean_ms is the
mean of per-frame times; both are reported because they answer different
deployment questions.
"""

from __future__ import annotations

import json
import logging
import resource
import statistics
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import Backend, BackendSpec, gt_boxes, make_backend
from .backends import detect as backend_detect
from .backends import segment as backend_segment
from .datasets import DatasetManifest, ManifestEntry, VideoSequence
from .errors import DatasetError, MaskShapeError, PromptsegError
from .masks import MetricBundle, as_mask, metric_bundle, read_image, read_mask, union_masks
from .prompts import (
    DEFAULT_THRESHOLDS,
    STRATEGIES,
    BoundingBox,
    HsvThresholds,
    build_prompts,
)

log = logging.getLogger(__name__)

DEFAULT_CONF = 0.3

EVAL_CSV_COLUMNS = (
    "strategy",
    "backend",
    "n",
    "pa",
    "ma",
    "miou",
    "fwiou",
    "dice",
    "mae_raw",
    "mae_scaled",
)
BENCH_CSV_COLUMNS = (
    "model",
    "video",
    "mean_ms",
    "fps",
    "harness_peak_mb",
    "backend_peak_mb",
)


def harness_peak_mb() -> float:
    """Peak resident set size of this process, in MB."""
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


@dataclass(frozen=True)
class BoxSource:
    """Where evaluation boxes come from.

    kind "detector" asks the backend, "gt" derives boxes from ground-truth
    components (dilate/min_area as in gt_boxes), "file" reads a detect-cache
    written by the CLI.
    """

    kind: str
    dilate: int = 0
    min_area: int = 1
    path: Path | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("detector", "gt", "file"):
            raise PromptsegError(f"unknown box source kind {self.kind!r}")
        if self.kind == "file" and self.path is None:
            raise PromptsegError("box source 'file' requires a path")
        if self.dilate < 0 or self.min_area < 1:
            raise PromptsegError("box source needs dilate >= 0 and min_area >= 1")

    @classmethod
    def parse(cls, text: str) -> "BoxSource":
        """Parse CLI syntax: detector | gt[:dilate=K,min_area=A] | file:PATH."""
        if text == "detector":
            return cls("detector")
        if text == "gt" or text.startswith("gt:"):
            dilate, min_area = 0, 1
            if text.startswith("gt:"):
                for item in text[3:].split(","):
                    key, sep, value = item.partition("=")
                    if not sep or key not in ("dilate", "min_area") or not value.lstrip("-").isdigit():
                        raise PromptsegError(
                            f"bad gt box-source option {item!r}; "
                            "expected gt:dilate=K,min_area=A"
                        )
                    if key == "dilate":
                        dilate = int(value)
                    else:
                        min_area = int(value)
            return cls("gt", dilate=dilate, min_area=min_area)
        if text.startswith("file:"):
            rest = text[len("file:") :]
            if not rest:
                raise PromptsegError("box source 'file:' needs a path")
            return cls("file", path=Path(rest))
        raise PromptsegError(
            f"unknown box source {text!r}; expected detector, gt[:...] or file:PATH"
        )

    def describe(self) -> str:
        if self.kind == "gt":
            return f"gt:dilate={self.dilate},min_area={self.min_area}"
        if self.kind == "file":
            return f"file:{self.path}"
        return "detector"


def write_box_cache(records: dict[str, list[BoundingBox]], path: str | Path) -> Path:
    """Persist detector output as JSON lines keyed by absolute image path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for image_path in sorted(records):
            boxes = [
                [b.x0, b.y0, b.x1, b.y1, b.confidence] for b in records[image_path]
            ]
            fh.write(json.dumps({"image": image_path, "boxes": boxes}) + "\n")
    return path


def load_box_cache(path: str | Path) -> dict[str, list[BoundingBox]]:
    """Read a detect-cache file back into {absolute image path: boxes}."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"box cache {path} does not exist")
    records: dict[str, list[BoundingBox]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                boxes = [
                    BoundingBox(int(x0), int(y0), int(x1), int(y1), float(conf))
                    for x0, y0, x1, y1, conf in record["boxes"]
                ]
                records[str(record["image"])] = boxes
            except (ValueError, TypeError, KeyError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed cache row: {exc}") from None
    return records


@dataclass(frozen=True)
class EvalConfig:
    """Everything an evaluation run depends on, echoed into reports."""

    strategy: str
    backend: BackendSpec
    box_source: BoxSource = field(default_factory=lambda: BoxSource("detector"))
    thresholds: HsvThresholds = DEFAULT_THRESHOLDS
    conf: float = DEFAULT_CONF
    mae_scale: float = 255.0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise PromptsegError(f"unknown strategy {self.strategy!r}")
        if self.workers < 1:
            raise PromptsegError("worker count must be >= 1")
        if not 0.0 <= self.conf <= 1.0:
            raise PromptsegError(f"confidence threshold {self.conf} outside [0,1]")

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "backend": {
                "kind": self.backend.kind,
                "endpoint": self.backend.endpoint,
                "model_name": self.backend.model_name,
            },
            "box_source": self.box_source.describe(),
            "hsv": {
                "hue_ranges": [list(r) for r in self.thresholds.hue_ranges],
                "s_range": list(self.thresholds.s_range),
                "v_range": list(self.thresholds.v_range),
            },
            "conf": self.conf,
            "mae_scale": self.mae_scale,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class EvalReport:
    """Per-image metric bundles plus their unweighted dataset mean."""

    per_image: tuple[MetricBundle, ...]
    mean: MetricBundle
    config: EvalConfig
    count: int
    backend_name: str


def _boxes_for_entry(
    config: EvalConfig,
    backend: Backend,
    entry: ManifestEntry,
    image: np.ndarray,
    gt: np.ndarray | None,
    cache: dict[str, list[BoundingBox]] | None,
) -> list[BoundingBox]:
    source = config.box_source
    if config.strategy == "auto":
        return []
    if source.kind == "detector":
        return backend_detect(
            backend, image, config.conf, image_path=str(entry.image_path)
        )
    if source.kind == "gt":
        if gt is None:
            raise DatasetError(
                f"box source 'gt' needs a mask for {entry.image_path.name}"
            )
        return gt_boxes(gt, dilate=source.dilate, min_area=source.min_area)
    key = str(entry.image_path.resolve())
    if cache is None or key not in cache:
        raise DatasetError(f"no cached boxes for {key}")
    height, width = image.shape[:2]
    boxes = []
    for box in cache[key]:
        clipped = box.clipped(width, height)
        if clipped is not None and clipped.confidence >= config.conf:
            boxes.append(clipped)
    boxes.sort(key=lambda b: (-b.confidence, b.y0, b.x0))
    return boxes


def _evaluate_entry(
    config: EvalConfig,
    backend: Backend,
    entry: ManifestEntry,
    cache: dict[str, list[BoundingBox]] | None,
) -> MetricBundle:
    image, gt = entry.load()
    boxes = _boxes_for_entry(config, backend, entry, image, gt, cache)
    prompt_sets = build_prompts(config.strategy, boxes, image, config.thresholds)
    predictions = [
        backend_segment(
            backend, image, ps, gt=gt, image_path=str(entry.image_path)
        ).mask
        for ps in prompt_sets
    ]
    if predictions:
        prediction = union_masks(predictions)
    else:
        prediction = np.zeros(image.shape[:2], dtype=bool)
    return metric_bundle(prediction, gt, mae_scale=config.mae_scale)


def _flush_partial(
    partial_path: str | Path,
    data: DatasetManifest,
    done: dict[int, MetricBundle],
) -> None:
    partial_path = Path(partial_path)
    partial_path.parent.mkdir(parents=True, exist_ok=True)
    with open(partial_path, "w", encoding="utf-8") as fh:
        for index in sorted(done):
            record = {"index": index, "image": str(data.entries[index].image_path)}
            record.update(done[index].as_dict())
            fh.write(json.dumps(record) + "\n")


def evaluate(
    config: EvalConfig,
    data: DatasetManifest,
    partial_path: str | Path | None = None,
) -> EvalReport:
    """Score a strategy/backend pair over a dataset of image/mask pairs.

    Workers > 1 fan images out to a thread pool, one private backend
    connection per thread; results are re-ordered by dataset index, so the
    report is identical to a single-worker run. On failure the completed
    per-image rows are flushed to partial_path (if given) before the error
    propagates.
    """
    if len(data) == 0:
        raise DatasetError("cannot evaluate an empty dataset")
    missing = [e.image_path.name for e in data if e.mask_path is None]
    if missing:
        raise DatasetError(
            f"{len(missing)} entries have no mask (first: {missing[0]})"
        )
    cache = None
    if config.box_source.kind == "file":
        cache = load_box_cache(config.box_source.path)

    local = threading.local()
    opened: list[Backend] = []
    opened_lock = threading.Lock()

    def _backend() -> Backend:
        backend = getattr(local, "backend", None)
        if backend is None:
            backend = make_backend(config.backend, config.thresholds)
            local.backend = backend
            with opened_lock:
                opened.append(backend)
        return backend

    done: dict[int, MetricBundle] = {}
    try:
        if config.workers == 1:
            for index, entry in enumerate(data):
                done[index] = _evaluate_entry(config, _backend(), entry, cache)
        else:

            def _job(entry: ManifestEntry) -> MetricBundle:
                return _evaluate_entry(config, _backend(), entry, cache)

            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = {
                    pool.submit(_job, entry): i for i, entry in enumerate(data)
                }
                wait(futures, return_when=FIRST_EXCEPTION)
                pool.shutdown(wait=True, cancel_futures=True)
                failure = None
                for future, index in futures.items():
                    if future.cancelled():
                        continue
                    exc = future.exception()
                    if exc is not None:
                        failure = failure or exc
                    else:
                        done[index] = future.result()
                if failure is not None:
                    raise failure
    except Exception:
        if partial_path is not None:
            _flush_partial(partial_path, data, done)
            log.error("evaluation aborted; partial results in %s", partial_path)
        raise
    finally:
        for backend in opened:
            backend.close()

    per_image = tuple(done[i] for i in range(len(data)))
    backend_name = opened[0].model_name if opened else config.backend.kind
    return EvalReport(
        per_image=per_image,
        mean=MetricBundle.mean(list(per_image)),
        config=config,
        count=len(per_image),
        backend_name=backend_name,
    )


@dataclass(frozen=True)
class VideoProfile:
    """Per-frame timings for one video, over the measured (post-warmup) window."""

    name: str
    detect_ms: tuple[float, ...]
    segment_ms: tuple[float, ...]
    end_to_end_ms: tuple[float, ...]
    total_wall_s: float
    backend_peak_mb: float

    @property
    def frame_count(self) -> int:
        return len(self.end_to_end_ms)

    @property
    def mean_ms(self) -> float:
        return statistics.fmean(self.end_to_end_ms)

    @property
    def fps(self) -> float:
        return self.frame_count / self.total_wall_s


@dataclass(frozen=True)
class BenchReport:
    """One or more profiled videos under the same model/config."""

    model: str
    videos: tuple[VideoProfile, ...]
    harness_peak_mb: float

    @property
    def frame_count(self) -> int:
        return sum(v.frame_count for v in self.videos)

    @property
    def mean_ms(self) -> float:
        frames = [ms for v in self.videos for ms in v.end_to_end_ms]
        return statistics.fmean(frames)

    @property
    def fps(self) -> float:
        return self.frame_count / sum(v.total_wall_s for v in self.videos)

    @property
    def backend_peak_mb(self) -> float:
        return max(v.backend_peak_mb for v in self.videos)

    @classmethod
    def merge(cls, reports: list["BenchReport"]) -> "BenchReport":
        if not reports:
            raise PromptsegError("cannot merge zero bench reports")
        models = {r.model for r in reports}
        if len(models) != 1:
            raise PromptsegError(f"cannot merge reports across models {sorted(models)}")
        videos = tuple(v for r in reports for v in r.videos)
        return cls(reports[0].model, videos, max(r.harness_peak_mb for r in reports))


def profile_video(
    config: EvalConfig,
    video: VideoSequence,
    warmup: int = 3,
    name: str | None = None,
) -> BenchReport:
    """Time detect→prompt→segment per frame, sequentially, on one video.

    The first `warmup` frames run in full but are excluded from statistics
    and from the wall-clock window, so model initialization does not distort
    per-frame means. detect_ms and segment_ms time the round-trips alone;
    end_to_end_ms covers the whole frame including decode and prompt
    construction, which is what the FPS window sees.
    """
    if warmup < 0:
        raise PromptsegError("warmup must be >= 0")
    if warmup >= len(video):
        raise PromptsegError(
            f"warmup {warmup} leaves no measured frames out of {len(video)}"
        )
    if name is None:
        name = video.frame_paths[0].parent.name
    source = config.box_source
    if source.kind == "gt" and config.strategy != "auto" and video.mask_paths is None:
        raise DatasetError("box source 'gt' needs a mask directory for the video")
    cache = load_box_cache(source.path) if source.kind == "file" else None

    backend = make_backend(config.backend, config.thresholds)
    detect_ms: list[float] = []
    segment_ms: list[float] = []
    end_to_end_ms: list[float] = []
    backend_peak = 0.0
    window_start = None
    try:
        for index, frame_path in enumerate(video.frame_paths):
            measured = index >= warmup
            if measured and window_start is None:
                window_start = time.perf_counter()
            frame_start = time.perf_counter()
            image = read_image(frame_path)
            height, width = image.shape[:2]

            det_ms = 0.0
            boxes: list[BoundingBox] = []
            if config.strategy != "auto":
                t0 = time.perf_counter()
                if source.kind == "detector":
                    boxes = backend_detect(
                        backend, image, config.conf, image_path=str(frame_path)
                    )
                elif source.kind == "gt":
                    gt = read_mask(video.mask_paths[index])
                    boxes = gt_boxes(gt, dilate=source.dilate, min_area=source.min_area)
                else:
                    key = str(frame_path.resolve())
                    if key not in cache:
                        raise DatasetError(f"no cached boxes for {key}")
                    boxes = [
                        b
                        for b in (c.clipped(width, height) for c in cache[key])
                        if b is not None and b.confidence >= config.conf
                    ]
                    boxes.sort(key=lambda b: (-b.confidence, b.y0, b.x0))
                det_ms = (time.perf_counter() - t0) * 1e3

            gt_for_segment = None
            if config.backend.kind == "oracle":
                if video.mask_paths is None:
                    raise DatasetError("the oracle backend needs video masks")
                gt_for_segment = read_mask(video.mask_paths[index])
            prompt_sets = build_prompts(config.strategy, boxes, image, config.thresholds)
            seg_ms = 0.0
            for ps in prompt_sets:
                t0 = time.perf_counter()
                response = backend_segment(
                    backend, image, ps, gt=gt_for_segment, image_path=str(frame_path)
                )
                seg_ms += (time.perf_counter() - t0) * 1e3
                backend_peak = max(backend_peak, response.peak_mem_mb)
            frame_ms = (time.perf_counter() - frame_start) * 1e3

            if measured:
                detect_ms.append(det_ms)
                segment_ms.append(seg_ms)
                end_to_end_ms.append(frame_ms)
        total_wall_s = time.perf_counter() - window_start
    finally:
        backend.close()

    profile = VideoProfile(
        name=name,
        detect_ms=tuple(detect_ms),
        segment_ms=tuple(segment_ms),
        end_to_end_ms=tuple(end_to_end_ms),
        total_wall_s=total_wall_s,
        backend_peak_mb=backend_peak,
    )
    model = config.backend.model_name or backend.model_name
    return BenchReport(model, (profile,), harness_peak_mb=harness_peak_mb())


def _fmt(value: float) -> str:
    """Stable float formatting for CSV cells (round-trips via %.10g)."""
    return "%.10g" % value


def _eval_rows(reports) -> list[list[str]]:
    rows = []
    for report in reports:
        mean = report.mean
        rows.append(
            [
                report.config.strategy,
                report.backend_name,
                str(report.count),
                _fmt(mean.pa),
                _fmt(mean.ma),
                _fmt(mean.miou),
                _fmt(mean.fwiou),
                _fmt(mean.dice),
                _fmt(mean.mae_raw),
                _fmt(mean.mae_scaled),
            ]
        )
    return rows


def _bench_rows(report: BenchReport) -> list[list[str]]:
    rows = []
    for video in report.videos:
        rows.append(
            [
                report.model,
                video.name,
                _fmt(video.mean_ms),
                _fmt(video.fps),
                _fmt(report.harness_peak_mb),
                _fmt(video.backend_peak_mb),
            ]
        )
    if len(report.videos) > 1:
        rows.append(
            [
                report.model,
                "overall",
                _fmt(report.mean_ms),
                _fmt(report.fps),
                _fmt(report.harness_peak_mb),
                _fmt(report.backend_peak_mb),
            ]
        )
    return rows


def _markdown_table(header: tuple[str, ...], rows: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str, out_path: str | Path) -> Path:
    """Write an EvalReport (or list of them) or BenchReport as csv/markdown.

    Column sets are frozen so downstream diffs stay meaningful; emitting the
    same report twice produces byte-identical files.
    """
    if fmt not in ("csv", "markdown"):
        raise PromptsegError(f"unknown report format {fmt!r}")
    if isinstance(report, BenchReport):
        header, rows = BENCH_CSV_COLUMNS, _bench_rows(report)
    else:
        reports = report if isinstance(report, (list, tuple)) else [report]
        header, rows = EVAL_CSV_COLUMNS, _eval_rows(reports)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        else:
            fh.write(_markdown_table(header, rows))
    return out_path


OVERLAY_COLORS = {
    "green": (0, 255, 0),
    "red": (255, 0, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
}


def render_overlay(
    image: np.ndarray,
    mask: np.ndarray,
    color: tuple[int, int, int] = OVERLAY_COLORS["green"],
    alpha: float = 0.5,
) -> np.ndarray:
    """Alpha-blend a color over the fire pixels of an image.

    out = floor((1-alpha)*pixel + alpha*color) where the mask is set, the
    untouched image elsewhere.
    """
    if not 0.0 <= alpha <= 1.0:
        raise PromptsegError(f"alpha {alpha} outside [0,1]")
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise MaskShapeError("overlay needs an HxWx3 uint8 image")
    mask = as_mask(mask)
    if mask.shape != image.shape[:2]:
        raise MaskShapeError(
            f"mask {mask.shape} does not match image {image.shape[:2]}"
        )
    out = image.copy()
    blend = (1.0 - alpha) * image[mask].astype(np.float64) + alpha * np.asarray(
        color, dtype=np.float64
    )
    out[mask] = np.floor(blend).astype(np.uint8)
    return out

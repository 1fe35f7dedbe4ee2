"""Segmentation and detection providers behind one uniform contract.

Built-in backends:

* ``oracle`` answers prompts straight from the ground-truth mask, isolating
  prompt-pipeline correctness from model quality,
* ``hsv_threshold`` classifies pixels by fire color, restricted to the
  prompt box when one is given.

External backends speak the wire protocol over a child process's standard
streams (``exec:CMD``) or a TCP socket (``tcp:HOST:PORT``). Backend handles
are not shared across threads; the harness opens one per worker.
"""

from __future__ import annotations

import shlex
import socket
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels, protocol
from .errors import BackendError, PromptError
from .masks import as_mask
from .prompts import (
    DEFAULT_THRESHOLDS,
    BoundingBox,
    HsvThresholds,
    PromptSet,
    fire_color_mask,
)

BACKEND_KINDS = ("oracle", "hsv_threshold", "external")


@dataclass(frozen=True)
class BackendSpec:
    """How to obtain a backend: built-in kind or external endpoint."""

    kind: str
    endpoint: str | None = None
    model_name: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise BackendError(f"unknown backend kind {self.kind!r}")
        if self.kind == "external" and not self.endpoint:
            raise BackendError("external backend requires an endpoint")

    @classmethod
    def parse(cls, text: str, model_name: str | None = None) -> "BackendSpec":
        """Parse a CLI backend spec: oracle | hsv | exec:CMD | tcp:HOST:PORT."""
        if text == "oracle":
            return cls("oracle", model_name=model_name or "oracle")
        if text in ("hsv", "hsv_threshold"):
            return cls("hsv_threshold", model_name=model_name or "hsv-threshold")
        if text.startswith("exec:") or text.startswith("tcp:"):
            return cls("external", endpoint=text, model_name=model_name)
        raise BackendError(
            f"unknown backend {text!r}; expected oracle, hsv, exec:CMD or tcp:HOST:PORT"
        )


@dataclass(frozen=True)
class SegmentResponse:
    """One segmentation answer plus the backend's self-reported costs."""

    mask: np.ndarray
    infer_ms: float
    peak_mem_mb: float


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected components of a mask: (int32 label image, count)."""
    mask = as_mask(mask)
    return _kernels.label4(mask.view(np.uint8))


def gt_boxes(
    gt: np.ndarray, dilate: int = 0, min_area: int = 1
) -> list[BoundingBox]:
    """Bounding boxes of ground-truth components, for detector-free runs.

    Components below min_area are dropped; surviving boxes grow by `dilate`
    pixels on every side, clamped to the image, confidence 1.0, sorted by
    (y0, x0).
    """
    gt = as_mask(gt)
    labels, count = label_components(gt)
    if count == 0:
        return []
    height, width = gt.shape
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    area = np.bincount(ids, minlength=count + 1)
    min_x = np.full(count + 1, width, dtype=np.int64)
    min_y = np.full(count + 1, height, dtype=np.int64)
    max_x = np.zeros(count + 1, dtype=np.int64)
    max_y = np.zeros(count + 1, dtype=np.int64)
    np.minimum.at(min_x, ids, xs)
    np.minimum.at(min_y, ids, ys)
    np.maximum.at(max_x, ids, xs)
    np.maximum.at(max_y, ids, ys)
    boxes = []
    for k in range(1, count + 1):
        if area[k] < min_area:
            continue
        boxes.append(
            BoundingBox(
                max(int(min_x[k]) - dilate, 0),
                max(int(min_y[k]) - dilate, 0),
                min(int(max_x[k]) + 1 + dilate, width),
                min(int(max_y[k]) + 1 + dilate, height),
                confidence=1.0,
            )
        )
    boxes.sort(key=lambda b: (b.y0, b.x0))
    return boxes


def _box_region(mask: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Mask restricted to the box; empty when the box misses the image."""
    out = np.zeros_like(mask)
    clipped = box.clipped(mask.shape[1], mask.shape[0])
    if clipped is not None:
        out[clipped.y0 : clipped.y1, clipped.x0 : clipped.x1] = mask[
            clipped.y0 : clipped.y1, clipped.x0 : clipped.x1
        ]
    return out


class OracleBackend:
    """Answers prompts from the ground-truth mask.

    Box prompts return gt within the box (points, if any, are ignored);
    point-only prompts return the union of the 4-connected gt components
    under positive points minus components under negative points; auto mode
    returns gt unchanged.
    """

    kind = "oracle"

    def __init__(self, model_name: str = "oracle"):
        self.model_name = model_name

    def segment(self, image, ps: PromptSet, gt=None, image_path=None) -> SegmentResponse:
        if gt is None:
            raise BackendError("oracle backend requires a ground-truth mask")
        gt = as_mask(gt)
        t0 = time.perf_counter()
        if ps.mode == "auto":
            out = gt.copy()
        elif ps.box is not None:
            out = _box_region(gt, ps.box)
        else:
            labels, _ = label_components(gt)
            height, width = gt.shape
            positive_ids: set[int] = set()
            negative_ids: set[int] = set()
            for p in ps.points:
                if not (0 <= p.x < width and 0 <= p.y < height):
                    raise PromptError(f"point ({p.x},{p.y}) outside {width}x{height}")
                lid = int(labels[p.y, p.x])
                if lid:
                    (positive_ids if p.positive else negative_ids).add(lid)
            keep = sorted(positive_ids - negative_ids)
            if keep:
                out = np.isin(labels, keep)
            else:
                out = np.zeros_like(gt)
        infer_ms = (time.perf_counter() - t0) * 1e3
        return SegmentResponse(out, infer_ms, 0.0)

    def detect(self, image, conf: float, image_path=None):
        raise BackendError(
            "the oracle backend has no detector; use box source 'gt' or 'file'"
        )

    def close(self) -> None:
        pass


class HsvThresholdBackend:
    """Classifies pixels by fire color; a box prompt restricts the output."""

    kind = "hsv_threshold"

    def __init__(
        self,
        thresholds: HsvThresholds = DEFAULT_THRESHOLDS,
        model_name: str = "hsv-threshold",
    ):
        self.thresholds = thresholds
        self.model_name = model_name

    def segment(self, image, ps: PromptSet, gt=None, image_path=None) -> SegmentResponse:
        t0 = time.perf_counter()
        fire = fire_color_mask(image, self.thresholds)
        if ps.mode != "auto" and ps.box is not None:
            fire = _box_region(fire, ps.box)
        infer_ms = (time.perf_counter() - t0) * 1e3
        return SegmentResponse(fire, infer_ms, 0.0)

    def detect(self, image, conf: float, image_path=None):
        raise BackendError(
            "the hsv backend has no detector; use box source 'gt' or 'file'"
        )

    def close(self) -> None:
        pass


class ExternalBackend:
    """Wire-protocol client over exec: (child process) or tcp: transports.

    One in-flight request per connection; the handshake happens lazily on
    first use and pins the server's model name for reports.
    """

    kind = "external"

    def __init__(self, endpoint: str, model_name: str | None = None, want_memory: bool = True):
        self.endpoint = endpoint
        self.model_name = model_name or "external"
        self.want_memory = want_memory
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._reader = None
        self._writer = None

    def connect(self) -> None:
        if self._reader is not None:
            return
        if self.endpoint.startswith("exec:"):
            cmd = shlex.split(self.endpoint[len("exec:") :])
            if not cmd:
                raise BackendError("exec: endpoint has an empty command")
            try:
                self._proc = subprocess.Popen(
                    cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE
                )
            except OSError as exc:
                raise BackendError(f"cannot launch backend {cmd[0]!r}: {exc}") from None
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        elif self.endpoint.startswith("tcp:"):
            addr = self.endpoint[len("tcp:") :]
            host, sep, port = addr.rpartition(":")
            if not sep or not port.isdigit():
                raise BackendError(f"tcp: endpoint must be tcp:HOST:PORT, got {self.endpoint!r}")
            try:
                self._sock = socket.create_connection((host, int(port)))
            except OSError as exc:
                raise BackendError(f"cannot connect to {addr}: {exc}") from None
            self._reader = self._sock.makefile("rb")
            self._writer = self._sock.makefile("wb")
        else:
            raise BackendError(f"unknown endpoint {self.endpoint!r}")

        reply = self._request(protocol.hello_message())
        if reply["type"] != "HELLO":
            raise BackendError(f"expected HELLO reply, got {reply['type']}")
        version = reply.get("protocol_version")
        if version != protocol.PROTOCOL_VERSION:
            raise BackendError(
                f"protocol version mismatch: server speaks {version}, "
                f"client speaks {protocol.PROTOCOL_VERSION}"
            )
        self.model_name = str(reply.get("model_name", self.model_name))

    def _request(self, msg: dict) -> dict:
        try:
            self._writer.write(protocol.dumps(msg))
            self._writer.flush()
            line = self._reader.readline()
        except (OSError, ValueError) as exc:
            raise BackendError(f"backend transport failure: {exc}") from None
        if not line:
            detail = ""
            if self._proc is not None and self._proc.poll() is not None:
                detail = f" (process exited with code {self._proc.returncode})"
            raise BackendError(f"backend closed the connection{detail}")
        reply = protocol.loads(line)
        if reply["type"] == "ERROR":
            raise BackendError(
                f"backend error [{reply.get('code', '?')}]: {reply.get('message', '')}"
            )
        return reply

    def segment(self, image, ps: PromptSet, gt=None, image_path=None) -> SegmentResponse:
        if image_path is None:
            raise BackendError("external backends address images by path")
        self.connect()
        height, width = image.shape[:2]
        msg = protocol.segment_message(
            str(image_path), width, height, ps, want_memory=self.want_memory
        )
        reply = self._request(msg)
        if reply["type"] != "MASK":
            raise BackendError(f"expected MASK reply, got {reply['type']}")
        mask, infer_ms, peak_mem_mb = protocol.parse_mask_reply(reply, width, height)
        return SegmentResponse(mask, infer_ms, peak_mem_mb)

    def detect(self, image, conf: float, image_path=None) -> list[BoundingBox]:
        if image_path is None:
            raise BackendError("external backends address images by path")
        self.connect()
        reply = self._request(protocol.detect_message(str(image_path), conf))
        if reply["type"] != "BOXES":
            raise BackendError(f"expected BOXES reply, got {reply['type']}")
        height, width = image.shape[:2]
        boxes = []
        for box in protocol.parse_boxes(reply):
            clipped = box.clipped(width, height)
            if clipped is not None and clipped.confidence >= conf:
                boxes.append(clipped)
        boxes.sort(key=lambda b: (-b.confidence, b.y0, b.x0))
        return boxes

    def close(self) -> None:
        for stream in (self._writer, self._reader):
            try:
                if stream is not None:
                    stream.close()
            except OSError:
                pass
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._proc is not None:
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._reader = self._writer = None

    def __enter__(self) -> "ExternalBackend":
        self.connect()
        return self

    def __exit__(self, *exc) -> None:
        self.close()


Backend = OracleBackend | HsvThresholdBackend | ExternalBackend


def make_backend(
    spec: BackendSpec, thresholds: HsvThresholds = DEFAULT_THRESHOLDS
) -> Backend:
    """Instantiate a backend from its spec (one per worker for external)."""
    if spec.kind == "oracle":
        return OracleBackend(model_name=spec.model_name or "oracle")
    if spec.kind == "hsv_threshold":
        return HsvThresholdBackend(
            thresholds=thresholds, model_name=spec.model_name or "hsv-threshold"
        )
    return ExternalBackend(spec.endpoint, model_name=spec.model_name)


def segment(
    backend: Backend,
    image: np.ndarray,
    prompts: PromptSet,
    gt: np.ndarray | None = None,
    image_path: str | None = None,
) -> SegmentResponse:
    """Run one prompt set through a backend and validate the response."""
    if backend.kind == "oracle" and gt is None:
        raise BackendError("oracle backend requires a ground-truth mask")
    response = backend.segment(image, prompts, gt=gt, image_path=image_path)
    if response.mask.shape != image.shape[:2]:
        raise BackendError(
            f"backend returned a {response.mask.shape[1]}x{response.mask.shape[0]} mask "
            f"for a {image.shape[1]}x{image.shape[0]} image"
        )
    return response


def detect(
    backend: Backend,
    image: np.ndarray,
    conf: float,
    image_path: str | None = None,
) -> list[BoundingBox]:
    """Ask a backend's detector for boxes at the given confidence threshold."""
    if not 0.0 <= conf <= 1.0:
        raise BackendError(f"confidence threshold {conf} outside [0,1]")
    return backend.detect(image, conf, image_path=image_path)

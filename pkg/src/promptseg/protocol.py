"""Wire protocol with external model servers, and the RLE mask codec.

Messages are single-line JSON objects (UTF-8, LF-terminated) with frozen
field names and field order; see protocol.md at the repository root. The
same SEGMENT field schema doubles as the serialization format for cached
prompt sets.
"""

from __future__ import annotations

import json

import numpy as np

from . import _kernels
from .errors import ProtocolError
from .masks import as_mask
from .prompts import BoundingBox, PointPrompt, PromptSet

PROTOCOL_VERSION = 1
CLIENT_NAME = "promptseg-harness"

MESSAGE_TYPES = ("HELLO", "SEGMENT", "DETECT", "MASK", "BOXES", "ERROR")

# The exact bytes a conforming client opens with (see protocol.md); servers
# may compare against this verbatim, and protocol-check asserts we emit it.
GOLDEN_HELLO = b'{"type":"HELLO","protocol_version":1,"model_name":"promptseg-harness"}\n'


# ---------------------------------------------------------------------------
# RLE mask codec


def encode_mask(mask: np.ndarray) -> str:
    """Row-major run-length encoding as space-separated decimal run lengths.

    Runs alternate starting with background; a leading 0 marks a mask whose
    first pixel is fire.
    """
    mask = as_mask(mask)
    runs = _kernels.rle_encode(mask.view(np.uint8).ravel())
    return " ".join(str(r) for r in runs)


def decode_mask(text: str, width: int, height: int) -> np.ndarray:
    """Decode an RLE string into a (height, width) boolean mask."""
    if width < 1 or height < 1:
        raise ProtocolError(f"mask dimensions {width}x{height} must be positive")
    try:
        runs = [int(tok) for tok in text.split()]
    except ValueError:
        raise ProtocolError(f"RLE runs must be decimal integers: {text!r}") from None
    if any(r < 0 for r in runs):
        raise ProtocolError(f"RLE runs must be non-negative: {text!r}")
    total = sum(runs)
    if total != width * height:
        raise ProtocolError(
            f"RLE runs sum to {total}, expected {width}x{height} = {width * height}"
        )
    flat = _kernels.rle_decode(np.asarray(runs, dtype=np.int64), width * height)
    return flat.astype(bool).reshape(height, width)


# ---------------------------------------------------------------------------
# Message construction (field order below is the frozen wire order)


def hello_message(model_name: str = CLIENT_NAME) -> dict:
    return {
        "type": "HELLO",
        "protocol_version": PROTOCOL_VERSION,
        "model_name": model_name,
    }


def prompt_fields(ps: PromptSet) -> dict:
    """The prompt portion of a SEGMENT message: mode, optional box, points.

    Auto mode carries no prompt geometry at all; prompted mode always has a
    points list (possibly empty) and a box when one was given.
    """
    fields: dict = {"mode": ps.mode}
    if ps.mode == "auto":
        return fields
    if ps.box is not None:
        fields["box"] = [ps.box.x0, ps.box.y0, ps.box.x1, ps.box.y1]
    fields["points"] = [[p.x, p.y, 1 if p.positive else 0] for p in ps.points]
    return fields


def segment_message(
    image_path: str,
    width: int,
    height: int,
    prompt_set: PromptSet,
    want_memory: bool = True,
) -> dict:
    msg = {
        "type": "SEGMENT",
        "image_path": image_path,
        "width": width,
        "height": height,
    }
    msg.update(prompt_fields(prompt_set))
    msg["want_memory"] = want_memory
    return msg


def detect_message(image_path: str, conf: float) -> dict:
    return {"type": "DETECT", "image_path": image_path, "conf": conf}


def mask_message(rle: str, infer_ms: float, peak_mem_mb: float) -> dict:
    return {
        "type": "MASK",
        "rle": rle,
        "infer_ms": infer_ms,
        "peak_mem_mb": peak_mem_mb,
    }


def boxes_message(boxes: list[BoundingBox]) -> dict:
    return {
        "type": "BOXES",
        "boxes": [[b.x0, b.y0, b.x1, b.y1, b.confidence] for b in boxes],
    }


def error_message(code: str, message: str) -> dict:
    return {"type": "ERROR", "code": code, "message": message}


def dumps(msg: dict) -> bytes:
    """Canonical one-line encoding: compact JSON in construction order + LF."""
    return (json.dumps(msg, separators=(",", ":")) + "\n").encode("utf-8")


def loads(line: bytes | str) -> dict:
    """Parse and minimally validate one message line."""
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message line: {exc}") from None
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise ProtocolError(f"message must be an object with a 'type': {line!r}")
    if msg["type"] not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg['type']!r}")
    return msg


def parse_prompt_set(msg: dict) -> PromptSet:
    """Rebuild a PromptSet from SEGMENT-schema fields."""
    mode = msg.get("mode")
    if mode not in ("auto", "prompted"):
        raise ProtocolError(f"bad prompt mode {mode!r}")
    box = None
    if "box" in msg:
        raw = msg["box"]
        if not (isinstance(raw, list) and len(raw) == 4):
            raise ProtocolError(f"box must be [x0,y0,x1,y1], got {raw!r}")
        box = BoundingBox(int(raw[0]), int(raw[1]), int(raw[2]), int(raw[3]))
    points = []
    for raw in msg.get("points", []):
        if not (isinstance(raw, list) and len(raw) == 3 and raw[2] in (0, 1)):
            raise ProtocolError(f"point must be [x,y,0|1], got {raw!r}")
        points.append(PointPrompt(int(raw[0]), int(raw[1]), positive=bool(raw[2])))
    return PromptSet(mode=mode, box=box, points=tuple(points))


def parse_boxes(msg: dict) -> list[BoundingBox]:
    """Extract detection boxes from a BOXES message."""
    boxes = []
    for raw in msg.get("boxes", []):
        if not (isinstance(raw, list) and len(raw) == 5):
            raise ProtocolError(f"detection must be [x0,y0,x1,y1,conf], got {raw!r}")
        boxes.append(
            BoundingBox(
                int(raw[0]), int(raw[1]), int(raw[2]), int(raw[3]), float(raw[4])
            )
        )
    return boxes


def parse_mask_reply(msg: dict, width: int, height: int) -> tuple[np.ndarray, float, float]:
    """Validate a MASK reply and decode it against the request dimensions."""
    for key in ("rle", "infer_ms", "peak_mem_mb"):
        if key not in msg:
            raise ProtocolError(f"MASK reply missing field {key!r}")
    mask = decode_mask(str(msg["rle"]), width, height)
    infer_ms = float(msg["infer_ms"])
    peak_mem_mb = float(msg["peak_mem_mb"])
    if infer_ms < 0 or peak_mem_mb < 0:
        raise ProtocolError("reported inference time and memory must be >= 0")
    return mask, infer_ms, peak_mem_mb


# ---------------------------------------------------------------------------
# PromptSet caching format (same schema as the SEGMENT prompt fields)


def serialize_prompt_sets(prompt_sets: list[PromptSet]) -> str:
    """One prompt set per line, in the SEGMENT field schema."""
    return "".join(dumps(prompt_fields(ps)).decode("utf-8") for ps in prompt_sets)


def deserialize_prompt_sets(text: str) -> list[PromptSet]:
    sets = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            fields = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed prompt-set line: {exc}") from None
        sets.append(parse_prompt_set(fields))
    return sets

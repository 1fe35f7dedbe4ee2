"""Prompt construction: boxes, points, and the seven prompting strategies.

Strategies (CLI names): auto, sp, sp+sn, mp, box, box+sp, box+mp.
All functions are pure and deterministic; identical inputs always produce
identical prompt sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PromptError

STRATEGIES = ("auto", "sp", "sp+sn", "mp", "box", "box+sp", "box+mp")

# Grid-point fractions of box width/height; quarter positions keep points
# away from the translucent flame boundary at box edges.
GRID_FRACTIONS = (0.25, 0.5, 0.75)

# Candidate lattice size for negative-point placement.
NEGATIVE_GRID = 16


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned half-open pixel box [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise PromptError(
                f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise PromptError(f"box confidence {self.confidence} outside [0,1]")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def fits(self, width: int, height: int) -> bool:
        return self.x1 <= width and self.y1 <= height

    def clipped(self, width: int, height: int) -> "BoundingBox | None":
        """Intersect with the image rectangle; None when nothing remains."""
        x0, y0 = max(self.x0, 0), max(self.y0, 0)
        x1, y1 = min(self.x1, width), min(self.y1, height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1, self.confidence)

    def distance_to(self, x: int, y: int) -> float:
        """Euclidean distance from a pixel to the nearest pixel of the box.

        Zero when the pixel lies inside the (half-open) box.
        """
        nx = min(max(x, self.x0), self.x1 - 1)
        ny = min(max(y, self.y0), self.y1 - 1)
        return math.hypot(x - nx, y - ny)


@dataclass(frozen=True)
class PointPrompt:
    """A single pixel asserted to be inside (positive) or outside the target."""

    x: int
    y: int
    positive: bool = True


@dataclass(frozen=True)
class PromptSet:
    """One segmentation request: automatic mode, or a box and/or points."""

    mode: str = "prompted"  # "auto" | "prompted"
    box: BoundingBox | None = None
    points: tuple[PointPrompt, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in ("auto", "prompted"):
            raise PromptError(f"unknown prompt mode {self.mode!r}")
        if self.mode == "auto" and (self.box is not None or self.points):
            raise PromptError("auto mode carries no box or points")
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True)
class HsvThresholds:
    """Fire-color gate: hue in any range (degrees), s and v in their ranges.

    Defaults cover red-orange-yellow flame hues while rejecting dark or
    washed-out pixels. Range ends are inclusive.
    """

    hue_ranges: tuple[tuple[float, float], ...] = ((0.0, 65.0), (340.0, 360.0))
    s_range: tuple[float, float] = (0.20, 1.0)
    v_range: tuple[float, float] = (0.50, 1.0)

    def __post_init__(self) -> None:
        for lo, hi in self.hue_ranges:
            if not (0.0 <= lo <= hi <= 360.0):
                raise PromptError(f"hue range ({lo},{hi}) is not well-ordered in [0,360]")
        for name, (lo, hi) in (("s", self.s_range), ("v", self.v_range)):
            if not (0.0 <= lo <= hi <= 1.0):
                raise PromptError(f"{name} range ({lo},{hi}) is not well-ordered in [0,1]")
        object.__setattr__(self, "hue_ranges", tuple(tuple(r) for r in self.hue_ranges))

    def hue_array(self) -> np.ndarray:
        return np.asarray(self.hue_ranges, dtype=np.float64).reshape(-1, 2)


DEFAULT_THRESHOLDS = HsvThresholds()


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone RGB(0-255) -> (hue degrees in [0,360), s, v in [0,1]).

    Mirrors the bulk kernel operation-for-operation so scalar and image-wide
    classification agree exactly.
    """
    rf, gf, bf = r / 255.0, g / 255.0, b / 255.0
    maxc = max(rf, gf, bf)
    minc = min(rf, gf, bf)
    delta = maxc - minc
    if delta == 0.0:
        h = 0.0
    elif maxc == rf:
        h = 60.0 * ((gf - bf) / delta)
        if h < 0.0:
            h = h + 360.0
    elif maxc == gf:
        h = 60.0 * ((bf - rf) / delta + 2.0)
    else:
        h = 60.0 * ((rf - gf) / delta + 4.0)
    s = 0.0 if maxc == 0.0 else delta / maxc
    return h, s, maxc


def is_fire_colored(
    r: int, g: int, b: int, thresholds: HsvThresholds = DEFAULT_THRESHOLDS
) -> bool:
    """True when the pixel's hue/saturation/value pass the fire-color gate."""
    h, s, v = rgb_to_hsv(r, g, b)
    s_lo, s_hi = thresholds.s_range
    v_lo, v_hi = thresholds.v_range
    if not (s_lo <= s <= s_hi and v_lo <= v <= v_hi):
        return False
    return any(lo <= h <= hi for lo, hi in thresholds.hue_ranges)


def fire_color_mask(
    image: np.ndarray, thresholds: HsvThresholds = DEFAULT_THRESHOLDS
) -> np.ndarray:
    """Boolean (H, W) mask of fire-colored pixels over an RGB image."""
    image = _check_image(image)
    s_lo, s_hi = thresholds.s_range
    v_lo, v_hi = thresholds.v_range
    out = _kernels.hsv_fire_mask(image, thresholds.hue_array(), s_lo, s_hi, v_lo, v_hi)
    return out.astype(bool)


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.ascontiguousarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise PromptError(
            f"image must be uint8 (H, W, 3), got {image.dtype} {image.shape}"
        )
    return image


def centroid_point(box: BoundingBox) -> PointPrompt:
    """Positive point at the box center (integer midpoint)."""
    return PointPrompt((box.x0 + box.x1) // 2, (box.y0 + box.y1) // 2, positive=True)


def grid_points(
    box: BoundingBox,
    image: np.ndarray,
    thresholds: HsvThresholds = DEFAULT_THRESHOLDS,
) -> list[PointPrompt]:
    """3x3 positive-point grid inside the box, kept only where fire-colored.

    Candidates sit at quarter fractions of the box extent, floored to pixel
    coordinates, in row-major order. When the color gate rejects all nine,
    falls back to the box centroid so a prompted set never goes point-free.
    """
    image = _check_image(image)
    if not box.fits(image.shape[1], image.shape[0]):
        raise PromptError(
            f"box ({box.x0},{box.y0},{box.x1},{box.y1}) exceeds image "
            f"{image.shape[1]}x{image.shape[0]}"
        )
    kept = []
    for fy in GRID_FRACTIONS:
        y = box.y0 + int(fy * box.height)
        for fx in GRID_FRACTIONS:
            x = box.x0 + int(fx * box.width)
            r, g, b = image[y, x]
            if is_fire_colored(int(r), int(g), int(b), thresholds):
                kept.append(PointPrompt(x, y, positive=True))
    if not kept:
        return [centroid_point(box)]
    return kept


def negative_point(
    boxes: list[BoundingBox], width: int, height: int
) -> PointPrompt | None:
    """Background point far from every box, or None if boxes cover the image.

    Scans a 16x16 candidate lattice at pixel centers and picks the candidate
    maximizing its minimum distance to all boxes; ties go to the smallest
    (y, x). With no boxes every candidate ties, so the first lattice point
    wins.
    """
    if width < 1 or height < 1:
        raise PromptError(f"image dimensions {width}x{height} must be positive")
    best: tuple[int, int] | None = None
    best_dist = -1.0
    for j in range(NEGATIVE_GRID):
        y = int((j + 0.5) * height / NEGATIVE_GRID)
        for i in range(NEGATIVE_GRID):
            x = int((i + 0.5) * width / NEGATIVE_GRID)
            if any(b.contains(x, y) for b in boxes):
                continue
            d = min((b.distance_to(x, y) for b in boxes), default=math.inf)
            if d > best_dist:
                best_dist = d
                best = (x, y)
    if best is None:
        return None
    return PointPrompt(best[0], best[1], positive=False)


def build_prompts(
    strategy: str,
    boxes: list[BoundingBox],
    image: np.ndarray,
    thresholds: HsvThresholds = DEFAULT_THRESHOLDS,
) -> list[PromptSet]:
    """Expand detected boxes into prompt sets for the chosen strategy.

    Returns a single auto-mode set for "auto" (boxes ignored) and one set
    per box otherwise. An empty box list under a prompted strategy yields an
    empty list; the caller treats the frame as "no fire detected".
    """
    if strategy not in STRATEGIES:
        raise PromptError(
            f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}"
        )
    if strategy == "auto":
        return [PromptSet(mode="auto")]
    image = _check_image(image)
    height, width = image.shape[:2]
    for box in boxes:
        if not box.fits(width, height):
            raise PromptError(
                f"box ({box.x0},{box.y0},{box.x1},{box.y1}) exceeds image {width}x{height}"
            )

    shared_negative: PointPrompt | None = None
    if strategy == "sp+sn":
        shared_negative = negative_point(boxes, width, height)

    sets: list[PromptSet] = []
    for box in boxes:
        if strategy == "sp":
            sets.append(PromptSet(points=(centroid_point(box),)))
        elif strategy == "sp+sn":
            points = [centroid_point(box)]
            if shared_negative is not None:
                points.append(shared_negative)
            sets.append(PromptSet(points=tuple(points)))
        elif strategy == "mp":
            sets.append(PromptSet(points=tuple(grid_points(box, image, thresholds))))
        elif strategy == "box":
            sets.append(PromptSet(box=box))
        elif strategy == "box+sp":
            sets.append(PromptSet(box=box, points=(centroid_point(box),)))
        else:  # box+mp
            sets.append(
                PromptSet(box=box, points=tuple(grid_points(box, image, thresholds)))
            )
    return sets

"""Synthetic fire-image builders shared by the test modules.

Images are rendered so that fire pixels land solidly inside the default HSV
fire gate (orange, saturated, bright) and background pixels stay outside it
(dark slate). Masks are written as 8-bit grayscale PNGs with fire = 255.
"""

from pathlib import Path

import numpy as np
from PIL import Image

FIRE_RGB = (230, 120, 20)  # hue ~28.6 deg, s ~0.91, v ~0.90
DARK_RGB = (30, 40, 50)  # v ~0.20: too dark to pass the fire gate


def render_fire_image(mask):
    """RGB image whose fire-colored pixels are exactly the mask."""
    image = np.empty(mask.shape + (3,), dtype=np.uint8)
    image[:] = DARK_RGB
    image[mask] = FIRE_RGB
    return image


def write_pair(images_dir, masks_dir, name, mask):
    Image.fromarray(render_fire_image(mask)).save(Path(images_dir) / f"{name}.png")
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(
        Path(masks_dir) / f"{name}.png"
    )


def random_blob_mask(rng, height, width):
    """One random filled rectangle or ellipse, never empty."""
    mask = np.zeros((height, width), dtype=bool)
    while not mask.any():
        mask[:] = False
        if rng.random() < 0.5:
            y0 = int(rng.integers(0, height - 2))
            x0 = int(rng.integers(0, width - 2))
            y1 = int(rng.integers(y0 + 1, height))
            x1 = int(rng.integers(x0 + 1, width))
            mask[y0:y1, x0:x1] = True
        else:
            cy = float(rng.integers(4, height - 4))
            cx = float(rng.integers(4, width - 4))
            ry = float(rng.integers(2, max(3, height // 3)))
            rx = float(rng.integers(2, max(3, width // 3)))
            yy, xx = np.mgrid[0:height, 0:width]
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    return mask


def write_blob_dataset(root, count=50, seed=0, height=48, width=64):
    """Random rectangle/ellipse dataset; returns (images_dir, masks_dir, masks)."""
    root = Path(root)
    images_dir = root / "images"
    masks_dir = root / "masks"
    images_dir.mkdir(parents=True)
    masks_dir.mkdir(parents=True)
    rng = np.random.default_rng(seed)
    masks = []
    for i in range(count):
        mask = random_blob_mask(rng, height, width)
        write_pair(images_dir, masks_dir, f"im{i:03d}", mask)
        masks.append(mask)
    return images_dir, masks_dir, masks


def filled_square_mask(size=64, origin=18, side=20):
    mask = np.zeros((size, size), dtype=bool)
    mask[origin : origin + side, origin : origin + side] = True
    return mask


def frame_mask(size=64, origin=18, side=29, thickness=10):
    """A hollow square frame: outer side x side square minus a centered hole."""
    mask = np.zeros((size, size), dtype=bool)
    end = origin + side
    mask[origin:end, origin:end] = True
    hole = origin + thickness
    mask[hole : end - thickness, hole : end - thickness] = False
    return mask


def write_ordering_dataset(root):
    """Dataset on which box-prompt quality strictly dominates grids and points.

    Three shape families, all single 4-connected components:
      * filled squares — a box, its center point, and the point grid all
        recover them exactly;
      * thick frames — the box-center misses (hole) but grid points land on
        the band;
      * thin frames — box-center and all grid points fall in the hole.
    """
    root = Path(root)
    images_dir = root / "images"
    masks_dir = root / "masks"
    images_dir.mkdir(parents=True)
    masks_dir.mkdir(parents=True)
    masks = []
    shapes = (
        [filled_square_mask() for _ in range(3)]
        + [frame_mask(thickness=10) for _ in range(3)]
        + [frame_mask(thickness=1) for _ in range(3)]
    )
    for i, mask in enumerate(shapes):
        write_pair(images_dir, masks_dir, f"im{i:03d}", mask)
        masks.append(mask)
    return images_dir, masks_dir, masks


def write_video_frames(root, count=8, height=32, width=40, with_masks=False):
    """Numbered frames (and optional masks) for the benchmark harness."""
    root = Path(root)
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True)
    masks_dir = None
    if with_masks:
        masks_dir = root / "frame_masks"
        masks_dir.mkdir(parents=True)
    for i in range(count):
        mask = np.zeros((height, width), dtype=bool)
        mask[8 : 8 + 10, 6 + i : 6 + i + 12] = True
        Image.fromarray(render_fire_image(mask)).save(frames_dir / f"frame_{i:04d}.png")
        if with_masks:
            Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(
                masks_dir / f"frame_{i:04d}.png"
            )
    return frames_dir, masks_dir

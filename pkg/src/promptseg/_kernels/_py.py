"""Pure-numpy fallback for the compiled kernels.

Every function here is result-identical to its Cython counterpart in
``_core.pyx`` (the parity tests assert exact equality); only speed differs.
"""

from __future__ import annotations

import numpy as np

implementation = "python"


def confusion2(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Binary confusion counts from two flat uint8 arrays.

    Returns a (2, 2) int64 matrix indexed [predicted][true]:
    [[TN, FN], [FP, TP]].
    """
    idx = (pred.astype(np.int64) << 1) | gt
    return np.bincount(idx, minlength=4).reshape(2, 2)


def rle_encode(bits: np.ndarray) -> list[int]:
    """Alternating run lengths of a flat uint8 mask, background run first.

    A mask that starts with fire gets a leading zero-length background run.
    """
    n = bits.size
    if n == 0:
        return []
    change = np.flatnonzero(bits[1:] != bits[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    runs = np.diff(bounds)
    if bits[0]:
        runs = np.concatenate(([0], runs))
    return [int(r) for r in runs]


def rle_decode(runs: np.ndarray, n: int) -> np.ndarray:
    """Expand alternating run lengths back into a flat uint8 array of size n."""
    runs = np.asarray(runs, dtype=np.int64)
    values = (np.arange(runs.size, dtype=np.int64) & 1).astype(np.uint8)
    return np.repeat(values, runs)


def hsv_fire_mask(
    rgb: np.ndarray,
    hue_ranges: np.ndarray,
    s_lo: float,
    s_hi: float,
    v_lo: float,
    v_hi: float,
) -> np.ndarray:
    """Per-pixel fire-color test over an (H, W, 3) uint8 RGB image.

    Hexcone HSV conversion with h in [0, 360), s and v in [0, 1]; a pixel
    passes when h falls in any of the given hue ranges (inclusive ends) and
    s, v fall in their ranges. Returns uint8 (H, W), 1 = fire-colored.
    """
    rgbf = rgb.astype(np.float64) / 255.0
    r, g, b = rgbf[..., 0], rgbf[..., 1], rgbf[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    delta = maxc - minc
    safe = np.where(delta == 0.0, 1.0, delta)
    h_r = 60.0 * ((g - b) / safe)
    h_r = np.where(h_r < 0.0, h_r + 360.0, h_r)
    h_g = 60.0 * ((b - r) / safe + 2.0)
    h_b = 60.0 * ((r - g) / safe + 4.0)
    h = np.select([delta == 0.0, maxc == r, maxc == g], [0.0, h_r, h_g], default=h_b)
    s = np.where(maxc == 0.0, 0.0, delta / np.where(maxc == 0.0, 1.0, maxc))
    v = maxc

    hue_ok = np.zeros(h.shape, dtype=bool)
    for lo, hi in hue_ranges:
        hue_ok |= (h >= lo) & (h <= hi)
    ok = hue_ok & (s >= s_lo) & (s <= s_hi) & (v >= v_lo) & (v <= v_hi)
    return ok.astype(np.uint8)


def label4(bits: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labeling of a (H, W) uint8 mask.

    Labels are 1-based and assigned in raster order of each component's
    first pixel; background stays 0. Returns (int32 labels, component count).
    """
    height, width = bits.shape
    grid = bits.tolist()
    labels = [[0] * width for _ in range(height)]
    count = 0
    for y0 in range(height):
        row = grid[y0]
        lrow = labels[y0]
        for x0 in range(width):
            if not row[x0] or lrow[x0]:
                continue
            count += 1
            lrow[x0] = count
            stack = [(y0, x0)]
            while stack:
                y, x = stack.pop()
                if y > 0 and grid[y - 1][x] and not labels[y - 1][x]:
                    labels[y - 1][x] = count
                    stack.append((y - 1, x))
                if y + 1 < height and grid[y + 1][x] and not labels[y + 1][x]:
                    labels[y + 1][x] = count
                    stack.append((y + 1, x))
                if x > 0 and grid[y][x - 1] and not labels[y][x - 1]:
                    labels[y][x - 1] = count
                    stack.append((y, x - 1))
                if x + 1 < width and grid[y][x + 1] and not labels[y][x + 1]:
                    labels[y][x + 1] = count
                    stack.append((y, x + 1))
    return np.asarray(labels, dtype=np.int32), count

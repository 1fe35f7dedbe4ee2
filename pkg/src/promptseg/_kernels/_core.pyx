# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pixel-loop kernels; result-identical to ``_py`` (parity-tested)."""

import numpy as np

implementation = "cython"


def confusion2(const unsigned char[::1] pred, const unsigned char[::1] gt):
    """Binary confusion counts, (2, 2) int64 indexed [predicted][true]."""
    cdef Py_ssize_t i, n = pred.shape[0]
    # Branchless: random masks make predicted branches miss ~half the time.
    cdef long long counts[4]
    counts[0] = counts[1] = counts[2] = counts[3] = 0
    for i in range(n):
        counts[(pred[i] << 1) | gt[i]] += 1
    out = np.empty((2, 2), dtype=np.int64)
    out[0, 0] = counts[0]
    out[0, 1] = counts[1]
    out[1, 0] = counts[2]
    out[1, 1] = counts[3]
    return out


def rle_encode(const unsigned char[::1] bits):
    """Alternating run lengths, background run first (may be zero-length)."""
    cdef Py_ssize_t i, n = bits.shape[0]
    cdef Py_ssize_t run = 1
    cdef unsigned char cur
    runs = []
    if n == 0:
        return runs
    cur = bits[0]
    if cur:
        runs.append(0)
    for i in range(1, n):
        if bits[i] == cur:
            run += 1
        else:
            runs.append(run)
            cur = bits[i]
            run = 1
    runs.append(run)
    return runs


def rle_decode(runs, Py_ssize_t n):
    """Expand alternating run lengths into a flat uint8 array of size n."""
    cdef long long[::1] rv = np.ascontiguousarray(runs, dtype=np.int64)
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef Py_ssize_t i, j, pos = 0
    cdef unsigned char val
    for i in range(rv.shape[0]):
        val = <unsigned char> (i & 1)
        if val:
            for j in range(rv[i]):
                ov[pos + j] = 1
        pos += rv[i]
    return out


def hsv_fire_mask(const unsigned char[:, :, ::1] rgb,
                  const double[:, ::1] hue_ranges,
                  double s_lo, double s_hi, double v_lo, double v_hi):
    """Per-pixel fire-color test; uint8 (H, W), 1 = fire-colored."""
    cdef Py_ssize_t y, x, k
    cdef Py_ssize_t height = rgb.shape[0], width = rgb.shape[1]
    cdef Py_ssize_t nranges = hue_ranges.shape[0]
    cdef double r, g, b, maxc, minc, delta, h, s, v
    cdef bint hue_ok
    out = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] ov = out
    for y in range(height):
        for x in range(width):
            r = rgb[y, x, 0] / 255.0
            g = rgb[y, x, 1] / 255.0
            b = rgb[y, x, 2] / 255.0
            maxc = r
            if g > maxc:
                maxc = g
            if b > maxc:
                maxc = b
            minc = r
            if g < minc:
                minc = g
            if b < minc:
                minc = b
            delta = maxc - minc
            if delta == 0.0:
                h = 0.0
            elif maxc == r:
                h = 60.0 * ((g - b) / delta)
                if h < 0.0:
                    h = h + 360.0
            elif maxc == g:
                h = 60.0 * ((b - r) / delta + 2.0)
            else:
                h = 60.0 * ((r - g) / delta + 4.0)
            if maxc == 0.0:
                s = 0.0
            else:
                s = delta / maxc
            v = maxc
            if s < s_lo or s > s_hi or v < v_lo or v > v_hi:
                continue
            hue_ok = False
            for k in range(nranges):
                if h >= hue_ranges[k, 0] and h <= hue_ranges[k, 1]:
                    hue_ok = True
                    break
            if hue_ok:
                ov[y, x] = 1
    return out


def label4(const unsigned char[:, ::1] bits):
    """4-connected labeling; 1-based labels in raster order of first pixel."""
    cdef Py_ssize_t height = bits.shape[0], width = bits.shape[1]
    cdef Py_ssize_t x0, y0, x, y, top
    cdef int count = 0
    labels = np.zeros((height, width), dtype=np.int32)
    cdef int[:, ::1] lv = labels
    stack = np.empty(height * width, dtype=np.int64)
    cdef long long[::1] sv = stack
    for y0 in range(height):
        for x0 in range(width):
            if not bits[y0, x0] or lv[y0, x0]:
                continue
            count += 1
            lv[y0, x0] = count
            sv[0] = y0 * width + x0
            top = 1
            while top > 0:
                top -= 1
                y = sv[top] // width
                x = sv[top] % width
                if y > 0 and bits[y - 1, x] and not lv[y - 1, x]:
                    lv[y - 1, x] = count
                    sv[top] = (y - 1) * width + x
                    top += 1
                if y + 1 < height and bits[y + 1, x] and not lv[y + 1, x]:
                    lv[y + 1, x] = count
                    sv[top] = (y + 1) * width + x
                    top += 1
                if x > 0 and bits[y, x - 1] and not lv[y, x - 1]:
                    lv[y, x - 1] = count
                    sv[top] = y * width + x - 1
                    top += 1
                if x + 1 < width and bits[y, x + 1] and not lv[y, x + 1]:
                    lv[y, x + 1] = count
                    sv[top] = y * width + x + 1
                    top += 1
    return labels, count

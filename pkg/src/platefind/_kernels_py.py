"""Pure-numpy kernel implementations.

Fallback for platefind._kernels when the compiled extension is unavailable.
Both implementations evaluate the same arithmetic expressions in the same
order so results agree bit-for-bit (see tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np

# Source coordinates beyond this magnitude are treated as "outside the image"
# before any float->int cast; keeps the compiled kernel clear of UB.
_COORD_LIMIT = 2e9

IMPLEMENTATION = "pure"


def warp_bilinear_gray(src: np.ndarray, hinv: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Inverse-map a single channel through a homography with bilinear taps.

    Output pixel (u, v) reads the source at hinv @ (u, v, 1); taps outside
    the source read as 0 (black).
    """
    src = np.ascontiguousarray(src, dtype=np.float64)
    h, w = src.shape
    uu, vv = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    denom = hinv[2, 0] * uu + hinv[2, 1] * vv + hinv[2, 2]
    valid = denom != 0.0
    safe = np.where(valid, denom, 1.0)
    sx = (hinv[0, 0] * uu + hinv[0, 1] * vv + hinv[0, 2]) / safe
    sy = (hinv[1, 0] * uu + hinv[1, 1] * vv + hinv[1, 2]) / safe
    valid &= (np.abs(sx) < _COORD_LIMIT) & (np.abs(sy) < _COORD_LIMIT)
    sx = np.where(valid, sx, -_COORD_LIMIT)
    sy = np.where(valid, sy, -_COORD_LIMIT)

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)

    def tap(dx: int, dy: int) -> np.ndarray:
        cx = ix + dx
        cy = iy + dy
        inside = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        vals = np.zeros_like(sx)
        vals[inside] = src[cy[inside], cx[inside]]
        return vals

    p00 = tap(0, 0)
    p01 = tap(1, 0)
    p10 = tap(0, 1)
    p11 = tap(1, 1)
    return (p00 * (1.0 - fx) + p01 * fx) * (1.0 - fy) + (p10 * (1.0 - fx) + p11 * fx) * fy


def weighted_levenshtein(
    a: np.ndarray, b: np.ndarray, sub_cost: np.ndarray, indel: float
) -> float:
    """Edit distance with unit insert/delete and a substitution cost matrix.

    a and b are uint8 code sequences indexing into sub_cost.
    """
    n = len(a)
    m = len(b)
    prev = [j * indel for j in range(m + 1)]
    cur = [0.0] * (m + 1)
    for i in range(1, n + 1):
        cur[0] = i * indel
        ai = a[i - 1]
        row = sub_cost[ai]
        for j in range(1, m + 1):
            best = prev[j] + indel
            left = cur[j - 1] + indel
            if left < best:
                best = left
            diag = prev[j - 1] + row[b[j - 1]]
            if diag < best:
                best = diag
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]

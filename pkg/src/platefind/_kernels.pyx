# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: bilinear homography warp and weighted edit distance.

Arithmetic mirrors platefind._kernels_py expression-for-expression so the two
implementations agree bit-for-bit.
"""

from libc.math cimport floor, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double _COORD_LIMIT = 2e9

IMPLEMENTATION = "cython"


def warp_bilinear_gray(src, hinv, int out_w, int out_h):
    """Inverse-map a single channel through a homography with bilinear taps."""
    cdef const double[:, ::1] s = np.ascontiguousarray(src, dtype=np.float64)
    cdef const double[:, ::1] m = np.ascontiguousarray(hinv, dtype=np.float64)
    out = np.zeros((out_h, out_w), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t h = s.shape[0]
    cdef Py_ssize_t w = s.shape[1]
    cdef Py_ssize_t u, v
    cdef double uu, vv, denom, sx, sy, fx, fy
    cdef double p00, p01, p10, p11
    cdef long long ix, iy
    for v in range(out_h):
        vv = <double> v
        for u in range(out_w):
            uu = <double> u
            denom = m[2, 0] * uu + m[2, 1] * vv + m[2, 2]
            if denom == 0.0:
                continue
            sx = (m[0, 0] * uu + m[0, 1] * vv + m[0, 2]) / denom
            sy = (m[1, 0] * uu + m[1, 1] * vv + m[1, 2]) / denom
            if fabs(sx) >= _COORD_LIMIT or fabs(sy) >= _COORD_LIMIT:
                continue
            fx = sx - floor(sx)
            fy = sy - floor(sy)
            ix = <long long> floor(sx)
            iy = <long long> floor(sy)
            p00 = s[iy, ix] if 0 <= ix < w and 0 <= iy < h else 0.0
            p01 = s[iy, ix + 1] if 0 <= ix + 1 < w and 0 <= iy < h else 0.0
            p10 = s[iy + 1, ix] if 0 <= ix < w and 0 <= iy + 1 < h else 0.0
            p11 = s[iy + 1, ix + 1] if 0 <= ix + 1 < w and 0 <= iy + 1 < h else 0.0
            o[v, u] = (p00 * (1.0 - fx) + p01 * fx) * (1.0 - fy) + (p10 * (1.0 - fx) + p11 * fx) * fy
    return out


def weighted_levenshtein(a, b, sub_cost, double indel):
    """Edit distance with unit insert/delete and a substitution cost matrix."""
    cdef const unsigned char[::1] ca = np.ascontiguousarray(a, dtype=np.uint8)
    cdef const unsigned char[::1] cb = np.ascontiguousarray(b, dtype=np.uint8)
    cdef const double[:, ::1] sub = np.ascontiguousarray(sub_cost, dtype=np.float64)
    cdef Py_ssize_t n = ca.shape[0]
    cdef Py_ssize_t m = cb.shape[0]
    prev_arr = np.empty(m + 1, dtype=np.float64)
    cur_arr = np.empty(m + 1, dtype=np.float64)
    cdef double[::1] prev = prev_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] tmp
    cdef Py_ssize_t i, j
    cdef double best, left, diag
    cdef unsigned char ai
    for j in range(m + 1):
        prev[j] = j * indel
    for i in range(1, n + 1):
        cur[0] = i * indel
        ai = ca[i - 1]
        for j in range(1, m + 1):
            best = prev[j] + indel
            left = cur[j - 1] + indel
            if left < best:
                best = left
            diag = prev[j - 1] + sub[ai, cb[j - 1]]
            if diag < best:
                best = diag
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return prev[m]

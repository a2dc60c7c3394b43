"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set PF_PURE_KERNELS=1 to force the fallback (used by the parity tests and the
benchmark harness). ACTIVE_IMPLEMENTATION reports which one was selected.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
if os.environ.get("PF_PURE_KERNELS", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled

        _impl = _compiled
    except ImportError:
        pass

ACTIVE_IMPLEMENTATION: str = _impl.IMPLEMENTATION


def warp_bilinear(src: np.ndarray, hinv: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Warp a 2D or HxWxC raster through a homography (output -> source map).

    Preserves dtype: uint8 inputs are rounded back to uint8, floats stay
    float64. Samples outside the source read as black.
    """
    hinv = np.asarray(hinv, dtype=np.float64)
    if src.ndim == 2:
        out = _impl.warp_bilinear_gray(src, hinv, int(out_w), int(out_h))
    elif src.ndim == 3:
        planes = [
            _impl.warp_bilinear_gray(src[:, :, c], hinv, int(out_w), int(out_h))
            for c in range(src.shape[2])
        ]
        out = np.stack(planes, axis=2)
    else:
        raise ValueError(f"expected 2D or 3D raster, got shape {src.shape}")
    if np.issubdtype(src.dtype, np.integer):
        return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out


def weighted_levenshtein(
    a_codes: np.ndarray, b_codes: np.ndarray, sub_cost: np.ndarray, indel: float = 1.0
) -> float:
    """Weighted edit distance over uint8 code sequences."""
    a = np.ascontiguousarray(a_codes, dtype=np.uint8)
    b = np.ascontiguousarray(b_codes, dtype=np.uint8)
    sub = np.ascontiguousarray(sub_cost, dtype=np.float64)
    return float(_impl.weighted_levenshtein(a, b, sub, float(indel)))

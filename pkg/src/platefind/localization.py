"""Plate localization: dense detection-map decoding, quad NMS, rectification.

A backend produces a per-cell map over a vehicle crop: an objectness
probability plus six affine parameters per cell. Decoding maps a canonical
centered unit square through each confident cell's affine into image space,
NMS removes duplicates, and the winning quadrilateral is unwarped to a flat
plate through a fitted homography.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import kernels
from .errors import BackendFailure, DegenerateQuad, InvalidMap
from .model import Quadrilateral

# Decoder geometry defaults. stride: image pixels per map cell; the canonical
# plate side is 7.75 strides, roughly a one-line plate at vehicle-crop scale.
DEFAULT_STRIDE = 16.0
DEFAULT_BASE_SIDE = 7.75 * DEFAULT_STRIDE
DEFAULT_PROB_THRESHOLD = 0.5
DEFAULT_NMS_IOU = 0.1
PLATE_OUT_W = 240
PLATE_OUT_H = 80

# Canonical unit square, TL TR BR BL, centered at the cell.
_CANONICAL_CORNERS = ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5))

# Affine channel order in cell tuples: a11, a12, tx, a21, a22, ty.
_A11, _A12, _TX, _A21, _A22, _TY = range(6)


@dataclass(frozen=True)
class DetectionMap:
    """Grid of per-cell plate evidence over one image region.

    probs: (h_c, w_c) objectness in [0, 1].
    affine: (h_c, w_c, 6) parameters ordered a11, a12, tx, a21, a22, ty.
    """

    probs: np.ndarray
    affine: np.ndarray
    stride: float
    base_side: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        affine = np.asarray(self.affine, dtype=np.float64)
        if probs.ndim != 2 or affine.shape != (*probs.shape, 6):
            raise InvalidMap(
                f"shape mismatch: probs {probs.shape} vs affine {affine.shape}"
            )
        if not np.all(np.isfinite(probs)) or not np.all(np.isfinite(affine)):
            raise InvalidMap("detection map contains non-finite values")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise InvalidMap("cell probabilities must lie in [0, 1]")
        if not (self.stride > 0 and self.base_side > 0):
            raise InvalidMap("stride and base_side must be positive")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "affine", affine)

    @property
    def h_c(self) -> int:
        return self.probs.shape[0]

    @property
    def w_c(self) -> int:
        return self.probs.shape[1]

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return ((col + 0.5) * self.stride, (row + 0.5) * self.stride)

    def to_json(self) -> str:
        """Interchange format; floats round-trip bit-exactly through repr."""
        cells = []
        for r in range(self.h_c):
            for c in range(self.w_c):
                a = self.affine[r, c]
                cells.append(
                    [
                        float(self.probs[r, c]),
                        float(a[_A11]),
                        float(a[_A12]),
                        float(a[_TX]),
                        float(a[_A21]),
                        float(a[_A22]),
                        float(a[_TY]),
                    ]
                )
        doc = {
            "h_c": self.h_c,
            "w_c": self.w_c,
            "stride": self.stride,
            "base_side": self.base_side,
            "cells": cells,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "DetectionMap":
        try:
            doc = json.loads(text)
            h_c, w_c = int(doc["h_c"]), int(doc["w_c"])
            cells = doc["cells"]
            if len(cells) != h_c * w_c:
                raise InvalidMap(f"expected {h_c * w_c} cells, got {len(cells)}")
            arr = np.asarray(cells, dtype=np.float64).reshape(h_c, w_c, 7)
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            if isinstance(exc, InvalidMap):
                raise
            raise InvalidMap(f"undecodable detection map document: {exc}") from exc
        return cls(
            probs=arr[:, :, 0],
            affine=arr[:, :, 1:],
            stride=float(doc["stride"]),
            base_side=float(doc["base_side"]),
        )

    @classmethod
    def zeros(cls, h_c: int, w_c: int, stride: float = DEFAULT_STRIDE,
              base_side: float = DEFAULT_BASE_SIDE) -> "DetectionMap":
        return cls(
            probs=np.zeros((h_c, w_c)),
            affine=np.zeros((h_c, w_c, 6)),
            stride=stride,
            base_side=base_side,
        )


@dataclass(frozen=True)
class ScoredQuad:
    quad: Quadrilateral
    score: float
    source_cell: tuple[int, int]


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so matrix[2, 2] == 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError(f"homography must be a finite 3x3 matrix, got {m!r}")
        if not math.isclose(m[2, 2], 1.0, rel_tol=0, abs_tol=1e-9):
            if m[2, 2] == 0:
                raise ValueError("homography cannot be normalized: H[2,2] == 0")
            m = m / m[2, 2]
        if abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) < 1e-12:
            raise ValueError("upper-left 2x2 block of homography is singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, points) -> np.ndarray:
        """Map (N, 2) points; returns (N, 2)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        homog = np.hstack([pts, np.ones((len(pts), 1))])
        mapped = homog @ self.matrix.T
        return mapped[:, :2] / mapped[:, 2:3]

    def inverse(self) -> "Homography":
        inv = np.linalg.inv(self.matrix)
        return Homography(inv / inv[2, 2])


@dataclass(frozen=True)
class RectifiedPlate:
    """Flat plate crop plus the provenance needed to trace it back."""

    image: np.ndarray
    source_quad: Quadrilateral
    homography: Homography
    score: float = 1.0


class PlateMapBackend(Protocol):
    """Produces a DetectionMap for a vehicle crop.

    origin is the crop's top-left corner in full-image coordinates; scene
    mocks use it to know which planted vehicle the crop belongs to.
    """

    name: str

    def map_for(self, crop: np.ndarray, origin: tuple[float, float]) -> DetectionMap:
        ...


def _order_tl_tr_br_bl(points: list[tuple[float, float]]) -> tuple:
    """Reorder a cyclic 4-point polygon to TL,TR,BR,BL (positive y-down area)."""
    pts = list(points)
    total = 0.0
    for i in range(4):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % 4]
        total += x0 * y1 - x1 * y0
    if total < 0:
        pts = [pts[0], pts[3], pts[2], pts[1]]
    start = min(range(4), key=lambda i: (pts[i][0] + pts[i][1], pts[i][1], pts[i][0]))
    return tuple(pts[(start + k) % 4] for k in range(4))


def decode_detection_map(
    det_map: DetectionMap, prob_threshold: float = DEFAULT_PROB_THRESHOLD
) -> list[ScoredQuad]:
    """Decode confident cells into scored quadrilaterals, best first.

    Per confident cell: clamp the affine diagonal to be non-negative, map the
    canonical centered square corners through base_side * (A @ q) + cell
    center, and re-order to the TL,TR,BR,BL convention. Cells whose quad
    collapses below 1 px^2 are dropped. tx/ty ride along in the map format
    but do not move corners.
    """
    if not (0 < prob_threshold <= 1):
        raise ValueError(f"prob_threshold must be in (0, 1], got {prob_threshold}")
    results: list[ScoredQuad] = []
    probs = det_map.probs
    rows, cols = np.nonzero(probs >= prob_threshold)
    for r, c in zip(rows.tolist(), cols.tolist()):
        a = det_map.affine[r, c]
        a11 = max(a[_A11], 0.0)
        a22 = max(a[_A22], 0.0)
        mat = np.array([[a11, a[_A12]], [a[_A21], a22]])
        cx, cy = det_map.cell_center(r, c)
        pts = []
        for qx, qy in _CANONICAL_CORNERS:
            vx, vy = mat @ (qx, qy)
            pts.append((det_map.base_side * vx + cx, det_map.base_side * vy + cy))
        area = abs(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]) * det_map.base_side**2
        if area < 1.0:
            continue
        try:
            quad = Quadrilateral(_order_tl_tr_br_bl(pts))
        except ValueError:
            continue
        results.append(ScoredQuad(quad=quad, score=float(probs[r, c]), source_cell=(r, c)))
    results.sort(key=lambda sq: -sq.score)
    return results


def _polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def _is_convex(pts: np.ndarray) -> bool:
    n = len(pts)
    sign = 0
    for i in range(n):
        e1 = pts[(i + 1) % n] - pts[i]
        e2 = pts[(i + 2) % n] - pts[(i + 1) % n]
        cross = e1[0] * e2[1] - e1[1] * e2[0]
        if abs(cross) < 1e-12:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman: clip a polygon against a convex polygon."""
    def inside(p, a, b):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0

    def intersect(p1, p2, a, b):
        d1 = p2 - p1
        d2 = b - a
        denom = d1[0] * d2[1] - d1[1] * d2[0]
        if denom == 0:
            return p2
        t = ((a[0] - p1[0]) * d2[1] - (a[1] - p1[1]) * d2[0]) / denom
        return p1 + t * d1

    # ensure positive orientation of the clip polygon for the inside test
    if 0.5 * float(
        np.dot(clip[:, 0], np.roll(clip[:, 1], -1)) - np.dot(np.roll(clip[:, 0], -1), clip[:, 1])
    ) < 0:
        clip = clip[::-1]
    output = subject
    for i in range(len(clip)):
        a, b = clip[i], clip[(i + 1) % len(clip)]
        if len(output) == 0:
            break
        input_pts = output
        output = []
        prev = input_pts[-1]
        for cur in input_pts:
            if inside(cur, a, b):
                if not inside(prev, a, b):
                    output.append(intersect(prev, cur, a, b))
                output.append(cur)
            elif inside(prev, a, b):
                output.append(intersect(prev, cur, a, b))
            prev = cur
        output = np.asarray(output) if len(output) else np.empty((0, 2))
    return np.asarray(output)


def _raster_iou(a: np.ndarray, b: np.ndarray, resolution: float = 1.0) -> float:
    """Rasterized IoU at the given pixel resolution (even-odd interior test)."""
    lo = np.minimum(a.min(axis=0), b.min(axis=0)) - resolution
    hi = np.maximum(a.max(axis=0), b.max(axis=0)) + resolution
    xs = np.arange(lo[0] + resolution / 2, hi[0], resolution)
    ys = np.arange(lo[1] + resolution / 2, hi[1], resolution)
    if len(xs) == 0 or len(ys) == 0:
        return 0.0
    gx, gy = np.meshgrid(xs, ys)

    def contains(poly):
        inside = np.zeros(gx.shape, dtype=bool)
        n = len(poly)
        for i in range(n):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % n]
            crosses = (y0 > gy) != (y1 > gy)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x0 + (gy - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (gx < xint)
        return inside

    in_a = contains(a)
    in_b = contains(b)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def quad_iou(a: Quadrilateral, b: Quadrilateral) -> float:
    """Intersection-over-union of two quads.

    Convex pairs use exact polygon clipping; anything non-convex falls back
    to rasterization at 1 px, since clamped affine decodes can brush
    degeneracy.
    """
    pa = np.asarray(a.corners, dtype=np.float64)
    pb = np.asarray(b.corners, dtype=np.float64)
    if not (_is_convex(pa) and _is_convex(pb)):
        return float(min(max(_raster_iou(pa, pb), 0.0), 1.0))
    inter_poly = _clip_polygon(pa, pb)
    inter = _polygon_area(inter_poly) if len(inter_poly) >= 3 else 0.0
    union = _polygon_area(pa) + _polygon_area(pb) - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def nms_quads(quads: list[ScoredQuad], iou_threshold: float = DEFAULT_NMS_IOU) -> list[ScoredQuad]:
    """Greedy suppression: keep best, drop overlaps at or above the threshold."""
    if not (0 <= iou_threshold < 1):
        raise ValueError(f"iou_threshold must be in [0, 1), got {iou_threshold}")
    remaining = sorted(enumerate(quads), key=lambda iq: (-iq[1].score, iq[0]))
    kept: list[ScoredQuad] = []
    while remaining:
        _, best = remaining.pop(0)
        kept.append(best)
        remaining = [
            (i, sq) for i, sq in remaining if quad_iou(best.quad, sq.quad) < iou_threshold
        ]
    return kept


def fit_rectifying_homography(quad: Quadrilateral, out_w: int, out_h: int) -> Homography:
    """Homography sending quad corners TL,TR,BR,BL onto the out_w x out_h rect.

    Solves the standard 8-unknown linear system from the four correspondences.
    """
    if out_w < 8 or out_h < 8:
        raise ValueError(f"output extent must be at least 8x8, got {out_w}x{out_h}")
    src = np.asarray(quad.corners, dtype=np.float64)
    for i in range(4):
        p, q, r = src[i], src[(i + 1) % 4], src[(i + 2) % 4]
        cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        if abs(cross) < 1e-9:
            raise DegenerateQuad(f"three collinear corners in {quad.corners}")
    dst = np.array([(0, 0), (out_w, 0), (out_w, out_h), (0, out_h)], dtype=np.float64)
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -x * u, -y * u]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -x * v, -y * v]
        rhs[2 * i] = u
        rhs[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateQuad(f"singular correspondence system for {quad.corners}") from exc
    matrix = np.append(h, 1.0).reshape(3, 3)
    try:
        return Homography(matrix)
    except ValueError as exc:
        raise DegenerateQuad(str(exc)) from exc


def warp_plate(
    image: np.ndarray,
    quad: Quadrilateral,
    out_w: int = PLATE_OUT_W,
    out_h: int = PLATE_OUT_H,
    score: float = 1.0,
) -> RectifiedPlate:
    """Rectify the quad region of an image into a flat out_w x out_h raster.

    Output pixel (u, v) samples the source at H^-1 (u, v) with bilinear
    interpolation; source taps outside the image read as black.
    """
    homography = fit_rectifying_homography(quad, out_w, out_h)
    hinv = homography.inverse().matrix
    out = kernels.warp_bilinear(image, hinv, out_w, out_h)
    return RectifiedPlate(image=out, source_quad=quad, homography=homography, score=score)


def localize_plate(
    image_region: np.ndarray,
    backend: PlateMapBackend,
    prob_threshold: float = DEFAULT_PROB_THRESHOLD,
    iou_threshold: float = DEFAULT_NMS_IOU,
    out_w: int = PLATE_OUT_W,
    out_h: int = PLATE_OUT_H,
    origin: tuple[float, float] = (0.0, 0.0),
) -> list[RectifiedPlate]:
    """Decode + NMS + warp for one vehicle crop; results ordered by score."""
    try:
        det_map = backend.map_for(image_region, origin)
    except Exception as exc:
        raise BackendFailure(getattr(backend, "name", type(backend).__name__), exc) from exc
    candidates = decode_detection_map(det_map, prob_threshold)
    survivors = nms_quads(candidates, iou_threshold)
    plates = []
    for sq in survivors:
        try:
            plates.append(warp_plate(image_region, sq.quad, out_w, out_h, score=sq.score))
        except DegenerateQuad:
            continue
    return plates

"""Shared domain vocabulary: vehicle categories, plate strings, geometry.

Everything here is an immutable value type with validation at construction,
so downstream stages can assume invariants instead of re-checking them.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyPlate, UnknownCategory

# The 36 OCR classes; also the only characters a normalized plate may contain.
PLATE_ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"

_NON_PLATE_CHARS = re.compile(r"[^0-9A-Z]")


class VehicleCategory(Enum):
    """The four vehicle buckets; enum values are the canonical wire labels."""

    TWO_WHEELER = "2-wheeler"
    THREE_WHEELER = "3-wheeler"
    FOUR_WHEELER = "4-wheeler"
    GT_FOUR_WHEELER = ">4-wheeler"

    @property
    def label(self) -> str:
        return self.value


# Accepts the canonical labels plus space/underscore variants, case-insensitive.
_CATEGORY_BY_KEY = {
    "2wheeler": VehicleCategory.TWO_WHEELER,
    "3wheeler": VehicleCategory.THREE_WHEELER,
    "4wheeler": VehicleCategory.FOUR_WHEELER,
    ">4wheeler": VehicleCategory.GT_FOUR_WHEELER,
}


def parse_vehicle_category(label: str) -> VehicleCategory:
    """Map a free-text category label to one of the four values.

    Raises UnknownCategory for anything outside the vocabulary.
    """
    if not isinstance(label, str):
        raise UnknownCategory(f"category label must be text, got {type(label).__name__}")
    key = re.sub(r"[\s\-_]+", "", label.strip().lower())
    try:
        return _CATEGORY_BY_KEY[key]
    except KeyError:
        raise UnknownCategory(f"unknown vehicle category {label!r}") from None


def normalize_plate_string(raw: str) -> str:
    """Canonicalize plate text: uppercase, keep only [0-9A-Z].

    Raises EmptyPlate when nothing survives.
    """
    normalized = _NON_PLATE_CHARS.sub("", str(raw).upper())
    if not normalized:
        raise EmptyPlate(f"plate text {raw!r} has no usable characters")
    return normalized


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image pixels, origin top-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        _require_finite("bounding box", self.x_min, self.y_min, self.x_max, self.y_max)
        if min(self.x_min, self.y_min) < 0:
            raise ValueError(f"bounding box coordinates must be >= 0: {self}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"bounding box must have positive extent: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def intersection_area(self, other: "BoundingBox") -> float:
        w = min(self.x_max, other.x_max) - max(self.x_min, other.x_min)
        h = min(self.y_max, other.y_max) - max(self.y_min, other.y_min)
        if w <= 0 or h <= 0:
            return 0.0
        return w * h

    def clip(self, width: float, height: float) -> "BoundingBox | None":
        """Clip to an image extent; None when nothing remains."""
        x0 = min(max(self.x_min, 0.0), width)
        y0 = min(max(self.y_min, 0.0), height)
        x1 = min(max(self.x_max, 0.0), width)
        y1 = min(max(self.y_max, 0.0), height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1)

    def pixel_extent(self) -> tuple[int, int, int, int]:
        """Integer (x0, y0, x1, y1) for raster cropping."""
        return (
            int(round(self.x_min)),
            int(round(self.y_min)),
            int(round(self.x_max)),
            int(round(self.y_max)),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


Point = tuple[float, float]


def _signed_area(corners: tuple[Point, ...]) -> float:
    total = 0.0
    n = len(corners)
    for i in range(n):
        x0, y0 = corners[i]
        x1, y1 = corners[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


def _segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


@dataclass(frozen=True)
class Quadrilateral:
    """Plate region: corners ordered TL, TR, BR, BL as seen in the image.

    With the image y axis pointing down, that traversal order yields a
    positive shoelace sum, which is what validation checks.
    """

    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        if len(self.corners) != 4:
            raise ValueError("quadrilateral needs exactly 4 corners")
        flat = [c for pt in self.corners for c in pt]
        _require_finite("quadrilateral", *flat)
        if _signed_area(self.corners) <= 0:
            raise ValueError(
                f"corners must follow the TL,TR,BR,BL convention (positive area): {self.corners}"
            )
        c = self.corners
        if _segments_cross(c[0], c[1], c[2], c[3]) or _segments_cross(c[1], c[2], c[3], c[0]):
            raise ValueError(f"corners form a self-intersecting polygon: {self.corners}")

    @property
    def area(self) -> float:
        return _signed_area(self.corners)

    def center(self) -> Point:
        xs = sum(p[0] for p in self.corners) / 4.0
        ys = sum(p[1] for p in self.corners) / 4.0
        return (xs, ys)

    def translated(self, dx: float, dy: float) -> "Quadrilateral":
        return Quadrilateral(tuple((x + dx, y + dy) for x, y in self.corners))

    def as_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.corners]

    @classmethod
    def from_box(cls, box: BoundingBox) -> "Quadrilateral":
        return cls(
            (
                (box.x_min, box.y_min),
                (box.x_max, box.y_min),
                (box.x_max, box.y_max),
                (box.x_min, box.y_max),
            )
        )

"""Synthetic road scenes with full ground truth.

Scenes carry everything the pipeline tests need: planted vehicles with
category/box/score, plate text, the plate's quadrilateral in the image, and
the per-cell affine parameters a map backend would have to emit for it.
Plates are parallelograms centered on a cell center of the vehicle crop's
detection grid, which is exactly the family the map decoder can represent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .detection import GroundTruthRegion
from .localization import (
    DEFAULT_BASE_SIDE,
    DEFAULT_STRIDE,
    DetectionMap,
    fit_rectifying_homography,
)
from .model import BoundingBox, Quadrilateral, VehicleCategory
from .synth import PlateSynthSpec, _render_flat

# body size ranges (w, h) per category, pixels
_BODY_SIZES = {
    VehicleCategory.TWO_WHEELER: ((100, 140), (130, 170)),
    VehicleCategory.THREE_WHEELER: ((140, 180), (140, 180)),
    VehicleCategory.FOUR_WHEELER: ((200, 280), (130, 180)),
    VehicleCategory.GT_FOUR_WHEELER: ((260, 340), (180, 240)),
}

_BODY_COLORS = {
    VehicleCategory.TWO_WHEELER: (196, 64, 60),
    VehicleCategory.THREE_WHEELER: (62, 168, 76),
    VehicleCategory.FOUR_WHEELER: (70, 96, 198),
    VehicleCategory.GT_FOUR_WHEELER: (208, 186, 60),
}


@dataclass(frozen=True)
class PlantedPlate:
    text: str
    quad: Quadrilateral  # full-image coordinates
    cell: tuple[int, int]  # (row, col) in the vehicle crop's grid
    affine: tuple[float, float, float, float]  # a11, a12, a21, a22


@dataclass(frozen=True)
class PlantedVehicle:
    category: VehicleCategory
    box: BoundingBox  # integer-valued, full-image coordinates
    score: float
    plate: PlantedPlate | None


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int
    height: int
    objects: tuple[PlantedVehicle, ...]
    stride: float = DEFAULT_STRIDE
    base_side: float = DEFAULT_BASE_SIDE

    @property
    def image_id(self) -> str:
        return f"scene-{self.seed:05d}"


def _plant_plate(
    box: BoundingBox,
    rng: np.random.Generator,
    stride: float,
    base_side: float,
) -> PlantedPlate | None:
    """Choose a decoder-representable parallelogram inside the vehicle box."""
    w, h = box.width, box.height
    # aim for the lower-middle of the body
    col = int(round((0.5 * w) / stride - 0.5))
    row = int(round((0.72 * h) / stride - 0.5))
    col = max(0, min(col, int(math.ceil(w / stride)) - 1))
    row = max(0, min(row, int(math.ceil(h / stride)) - 1))
    cx = (col + 0.5) * stride
    cy = (row + 0.5) * stride

    pw = min(0.82 * w, 176.0)
    ph = pw / 3.0
    text = _random_plate_text(rng, pw)
    theta = rng.uniform(-0.06, 0.06)  # radians, mild tilt
    shear = rng.uniform(-0.12, 0.12)
    for _ in range(8):
        ux, uy = (pw / 2) * math.cos(theta), (pw / 2) * math.sin(theta)
        vx, vy = shear * (ph / 2), ph / 2
        corners = [
            (cx - ux - vx, cy - uy - vy),
            (cx + ux - vx, cy + uy - vy),
            (cx + ux + vx, cy + uy + vy),
            (cx - ux + vx, cy - uy + vy),
        ]
        margin = 3.0
        if all(margin <= x <= w - margin and margin <= y <= h - margin for x, y in corners):
            quad_local = Quadrilateral(tuple(corners))
            a11 = 2 * ux / base_side
            a12 = 2 * vx / base_side
            a21 = 2 * uy / base_side
            a22 = 2 * vy / base_side
            quad_full = quad_local.translated(box.x_min, box.y_min)
            return PlantedPlate(
                text=text, quad=quad_full, cell=(row, col), affine=(a11, a12, a21, a22)
            )
        pw *= 0.85
        ph = pw / 3.0
    return None


def _random_plate_text(rng: np.random.Generator, plate_width: float) -> str:
    """Random plate text, shorter on narrow plates so glyphs stay legible."""
    from .model import PLATE_ALPHABET

    max_len = max(6, min(10, int(plate_width / 11.0)))
    length = int(rng.integers(6, max_len + 1))
    return "".join(PLATE_ALPHABET[i] for i in rng.integers(0, len(PLATE_ALPHABET), size=length))


def generate_scene(
    seed: int,
    width: int = 640,
    height: int = 480,
    max_vehicles: int = 2,
    plate_prob: float = 1.0,
) -> SceneSpec:
    """Deterministic random scene: 1..max_vehicles non-overlapping vehicles."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_vehicles + 1))
    objects: list[PlantedVehicle] = []
    categories = list(VehicleCategory)
    for _ in range(n):
        for _attempt in range(40):
            category = categories[int(rng.integers(0, len(categories)))]
            (w_lo, w_hi), (h_lo, h_hi) = _BODY_SIZES[category]
            bw = int(rng.integers(w_lo, w_hi + 1))
            bh = int(rng.integers(h_lo, h_hi + 1))
            if bw + 20 >= width or bh + 20 >= height:
                continue
            x0 = int(rng.integers(10, width - bw - 10))
            y0 = int(rng.integers(10, height - bh - 10))
            box = BoundingBox(float(x0), float(y0), float(x0 + bw), float(y0 + bh))
            if any(box.intersection_area(o.box) > 0 for o in objects):
                continue
            plate = None
            if rng.random() < plate_prob:
                plate = _plant_plate(box, rng, DEFAULT_STRIDE, DEFAULT_BASE_SIDE)
            score = float(rng.uniform(0.75, 0.99))
            objects.append(PlantedVehicle(category=category, box=box, score=score, plate=plate))
            break
    return SceneSpec(seed=seed, width=width, height=height, objects=tuple(objects))


def _paint_plate(image: np.ndarray, plate: PlantedPlate, rng: np.random.Generator) -> None:
    """Render the flat plate and paste it into the quad region in place."""
    from . import kernels

    flat_w, flat_h = 240, 80
    spec = PlateSynthSpec.zero_noise(width=flat_w, height=flat_h)
    flat, _, _ = _render_flat(plate.text, spec)
    flat = np.clip(np.round(flat), 0, 255)

    corners = np.asarray(plate.quad.corners)
    bx0 = int(math.floor(corners[:, 0].min()))
    by0 = int(math.floor(corners[:, 1].min()))
    bx1 = int(math.ceil(corners[:, 0].max())) + 1
    by1 = int(math.ceil(corners[:, 1].max())) + 1
    bx0, by0 = max(bx0, 0), max(by0, 0)
    by1 = min(by1, image.shape[0])
    bx1 = min(bx1, image.shape[1])
    if bx1 <= bx0 or by1 <= by0:
        return

    hmat = fit_rectifying_homography(plate.quad, flat_w, flat_h).matrix
    shift = np.array([[1.0, 0.0, bx0], [0.0, 1.0, by0], [0.0, 0.0, 1.0]])
    warped = kernels.warp_bilinear(flat, hmat @ shift, bx1 - bx0, by1 - by0)

    # interior mask of the (convex) quad at pixel centers
    gx, gy = np.meshgrid(
        np.arange(bx0, bx1, dtype=np.float64), np.arange(by0, by1, dtype=np.float64)
    )
    inside = np.ones(gx.shape, dtype=bool)
    pts = list(plate.quad.corners)
    for i in range(4):
        x0p, y0p = pts[i]
        x1p, y1p = pts[(i + 1) % 4]
        inside &= (x1p - x0p) * (gy - y0p) - (y1p - y0p) * (gx - x0p) >= 0
    # shave the outline so edge pixels never sample the zero-padded border
    inside = ndimage.binary_erosion(
        inside, structure=np.ones((3, 3), dtype=bool), iterations=2
    )
    region = image[by0:by1, bx0:bx1]
    for c in range(3):
        channel = region[:, :, c]
        channel[inside] = np.clip(np.round(warped[inside]), 0, 255).astype(np.uint8)


def render_scene(spec: SceneSpec) -> np.ndarray:
    """Deterministic RGB render of a scene spec."""
    rng = np.random.default_rng(np.uint64(spec.seed) + np.uint64(0x5CE9E))
    image = np.full((spec.height, spec.width, 3), 104.0)
    image += rng.normal(0.0, 5.0, size=image.shape)
    image = np.clip(np.round(image), 0, 255).astype(np.uint8)

    for obj in spec.objects:
        x0, y0, x1, y1 = obj.box.pixel_extent()
        color = _BODY_COLORS[obj.category]
        body = np.array(color, dtype=np.float64) + rng.normal(0.0, 3.0, size=(y1 - y0, x1 - x0, 3))
        image[y0:y1, x0:x1] = np.clip(np.round(body), 0, 255).astype(np.uint8)
        # dark wheel strip along the bottom edge of the body
        strip = max(4, (y1 - y0) // 14)
        image[y1 - strip : y1, x0:x1] = (38, 38, 40)
        if obj.plate is not None:
            _paint_plate(image, obj.plate, rng)
    return image


def truth_regions(spec: SceneSpec) -> list[GroundTruthRegion]:
    return [
        GroundTruthRegion(image_id=spec.image_id, category=o.category, box=o.box)
        for o in spec.objects
    ]


class ScenePlateMapBackend:
    """Plate-map backend that replays a scene's planted plates.

    Crops are matched to planted vehicles by their origin in full-image
    coordinates; unmatched crops (or vehicles without a plate) yield an
    all-zero map.
    """

    concurrent_safe = True

    def __init__(self, *specs: SceneSpec, origin_tolerance: float = 8.0):
        self.name = "scene-map"
        self._vehicles: list[PlantedVehicle] = [o for s in specs for o in s.objects]
        self._stride = specs[0].stride if specs else DEFAULT_STRIDE
        self._base_side = specs[0].base_side if specs else DEFAULT_BASE_SIDE
        self._tolerance = origin_tolerance

    def _match(self, origin: tuple[float, float]) -> PlantedVehicle | None:
        best = None
        best_d = self._tolerance
        for v in self._vehicles:
            d = math.hypot(v.box.x_min - origin[0], v.box.y_min - origin[1])
            if d <= best_d:
                best, best_d = v, d
        return best

    def map_for(self, crop: np.ndarray, origin: tuple[float, float] = (0.0, 0.0)) -> DetectionMap:
        h, w = crop.shape[:2]
        h_c = max(1, int(math.ceil(h / self._stride)))
        w_c = max(1, int(math.ceil(w / self._stride)))
        det_map = DetectionMap.zeros(h_c, w_c, stride=self._stride, base_side=self._base_side)
        vehicle = self._match(origin)
        if vehicle is None or vehicle.plate is None:
            return det_map
        row, col = vehicle.plate.cell
        if row >= h_c or col >= w_c:
            return det_map
        probs = det_map.probs.copy()
        affine = det_map.affine.copy()
        probs[row, col] = 0.95
        a11, a12, a21, a22 = vehicle.plate.affine
        affine[row, col] = (a11, a12, 0.0, a21, a22, 0.0)
        return DetectionMap(probs, affine, stride=self._stride, base_side=self._base_side)

"""Vehicle detection: pluggable backend contract, VIA ground truth, F1 eval.

The detector itself is a backend slot (any instance-segmentation model that
emits category + box + mask + score plugs in); this module owns everything
around that slot: thresholding, annotation ingestion, greedy-matching
evaluation, and a deterministic scene-driven mock for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import BackendFailure, EmptyImage, MalformedAnnotation, UnknownCategory, UnknownImage
from .model import BoundingBox, VehicleCategory, parse_vehicle_category

DEFAULT_IOU_THRESHOLD = 0.5


def filled_box_mask(box: BoundingBox) -> np.ndarray:
    """All-ones mask matching the box's integer pixel extent."""
    x0, y0, x1, y1 = box.pixel_extent()
    return np.ones((max(y1 - y0, 1), max(x1 - x0, 1)), dtype=bool)


@dataclass(frozen=True)
class VehicleDetection:
    """One detected vehicle. mask covers exactly the box's pixel extent."""

    category: VehicleCategory
    box: BoundingBox
    score: float
    mask: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        mask = self.mask if self.mask is not None else filled_box_mask(self.box)
        mask = np.asarray(mask, dtype=bool)
        x0, y0, x1, y1 = self.box.pixel_extent()
        expected = (max(y1 - y0, 1), max(x1 - x0, 1))
        if mask.shape != expected:
            raise ValueError(f"mask shape {mask.shape} != box extent {expected}")
        if not mask.any():
            raise ValueError("mask must contain at least one set pixel")
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class GroundTruthRegion:
    image_id: str
    category: VehicleCategory
    box: BoundingBox


@dataclass(frozen=True)
class MetricBucket:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float = field(init=False)
    recall: float = field(init=False)
    f1: float = field(init=False)

    def __post_init__(self):
        tp, fp, fn = self.true_positives, self.false_positives, self.false_negatives
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "recall", recall)
        object.__setattr__(self, "f1", f1)


@dataclass(frozen=True)
class EvalMetrics:
    per_category: dict[VehicleCategory, MetricBucket]
    overall: MetricBucket


class DetectorBackend(Protocol):
    """Behavioral contract: image in, detections out, deterministic per state."""

    name: str
    concurrent_safe: bool

    def detect(self, image: np.ndarray) -> list[VehicleDetection]:
        ...


def detect_vehicles(
    image: np.ndarray, backend: DetectorBackend, score_threshold: float = 0.5
) -> list[VehicleDetection]:
    """Run a backend, keep detections at or above the threshold, best first.

    Boxes are clipped to the image bounds (detections falling entirely
    outside are dropped); masks are sliced to match.
    """
    if image is None or image.size == 0:
        raise EmptyImage("cannot detect vehicles in an empty image")
    if not (0.0 <= score_threshold <= 1.0):
        raise ValueError(f"score_threshold must be in [0, 1], got {score_threshold}")
    try:
        raw = backend.detect(image)
    except Exception as exc:
        raise BackendFailure(getattr(backend, "name", type(backend).__name__), exc) from exc
    height, width = image.shape[:2]
    kept: list[VehicleDetection] = []
    for det in raw:
        if det.score < score_threshold:
            continue
        clipped = det.box.clip(float(width), float(height))
        if clipped is None:
            continue
        if clipped == det.box:
            kept.append(det)
            continue
        ox0, oy0, _, _ = det.box.pixel_extent()
        cx0, cy0, cx1, cy1 = clipped.pixel_extent()
        mask = det.mask[cy0 - oy0 : cy1 - oy0, cx0 - ox0 : cx1 - ox0]
        if mask.size == 0 or not mask.any():
            mask = filled_box_mask(clipped)
        kept.append(VehicleDetection(det.category, clipped, det.score, mask))
    kept.sort(key=lambda d: -d.score)
    return kept


def load_via_annotations(document: Mapping) -> list[GroundTruthRegion]:
    """Extract rectangular ground truth from a VIA-style annotation document.

    Only "rect" regions are in scope; any other shape is MalformedAnnotation.
    The region attribute "type" carries the vehicle category label.
    """
    if not isinstance(document, Mapping):
        raise MalformedAnnotation("annotation document must be a JSON object")
    regions: list[GroundTruthRegion] = []
    for file_key, entry in document.items():
        if not isinstance(entry, Mapping) or "filename" not in entry:
            raise MalformedAnnotation(f"{file_key}: missing filename")
        image_id = str(entry["filename"])
        for idx, region in enumerate(entry.get("regions") or []):
            where = f"{file_key}/regions[{idx}]"
            if not isinstance(region, Mapping):
                raise MalformedAnnotation(f"{where}: region must be an object")
            shape = region.get("shape_attributes")
            attrs = region.get("region_attributes")
            if not isinstance(shape, Mapping) or not isinstance(attrs, Mapping):
                raise MalformedAnnotation(f"{where}: missing shape or region attributes")
            if shape.get("name") != "rect":
                raise MalformedAnnotation(
                    f"{where}: unsupported shape {shape.get('name')!r} (only rect)"
                )
            try:
                x = float(shape["x"])
                y = float(shape["y"])
                w = float(shape["width"])
                h = float(shape["height"])
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedAnnotation(f"{where}: bad rect geometry: {exc}") from exc
            try:
                box = BoundingBox(x, y, x + w, y + h)
            except ValueError as exc:
                raise MalformedAnnotation(f"{where}: {exc}") from exc
            try:
                category = parse_vehicle_category(str(attrs.get("type", "")))
            except UnknownCategory as exc:
                raise UnknownCategory(f"{image_id}: {exc}") from exc
            regions.append(GroundTruthRegion(image_id=image_id, category=category, box=box))
    return regions


def iou_boxes(a: BoundingBox, b: BoundingBox) -> float:
    inter = a.intersection_area(b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def _group_truth(
    truth: Mapping[str, Sequence[GroundTruthRegion]] | Iterable[GroundTruthRegion],
) -> dict[str, list[GroundTruthRegion]]:
    if isinstance(truth, Mapping):
        return {str(k): list(v) for k, v in truth.items()}
    grouped: dict[str, list[GroundTruthRegion]] = {}
    for region in truth:
        grouped.setdefault(region.image_id, []).append(region)
    return grouped


def evaluate_f1(
    predictions: Mapping[str, Sequence[VehicleDetection]],
    truth: Mapping[str, Sequence[GroundTruthRegion]] | Iterable[GroundTruthRegion],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> EvalMetrics:
    """Greedy per-image matching, then precision/recall/F1 per category.

    Predictions are matched in descending score order (earlier list position
    breaks ties); each claims the unclaimed same-category truth with highest
    IoU >= iou_threshold. Pass truth as a mapping to represent images that
    truly contain nothing.
    """
    if not (0 < iou_threshold <= 1):
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    truth_by_image = _group_truth(truth)
    unknown = set(predictions) - set(truth_by_image)
    if unknown:
        raise UnknownImage(f"predictions reference images without truth: {sorted(unknown)}")

    counts = {cat: [0, 0, 0] for cat in VehicleCategory}  # tp, fp, fn
    for image_id, truths in truth_by_image.items():
        preds = list(predictions.get(image_id, []))
        order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
        claimed = [False] * len(truths)
        for i in order:
            det = preds[i]
            best_iou = 0.0
            best_j = -1
            for j, gt in enumerate(truths):
                if claimed[j] or gt.category is not det.category:
                    continue
                overlap = iou_boxes(det.box, gt.box)
                if overlap >= iou_threshold and overlap > best_iou:
                    best_iou = overlap
                    best_j = j
            if best_j >= 0:
                claimed[best_j] = True
                counts[det.category][0] += 1
            else:
                counts[det.category][1] += 1
        for j, gt in enumerate(truths):
            if not claimed[j]:
                counts[gt.category][2] += 1

    per_category = {
        cat: MetricBucket(tp, fp, fn) for cat, (tp, fp, fn) in counts.items()
    }
    totals = [sum(c[i] for c in counts.values()) for i in range(3)]
    return EvalMetrics(per_category=per_category, overall=MetricBucket(*totals))


@dataclass(frozen=True)
class PlantedObject:
    """Scene ground truth for one vehicle, as the scene generator records it."""

    category: VehicleCategory
    box: BoundingBox
    score: float = 0.9


class MockDetectorBackend:
    """Returns exactly the planted objects, optionally jittered once at build.

    Jitter shifts each box corner by up to `jitter` pixels, drawn from the
    seeded generator at construction so repeated calls stay identical.
    """

    concurrent_safe = True

    def __init__(self, objects: Sequence[PlantedObject], jitter: float = 0.0, seed: int = 0):
        self.name = "mock-scene"
        rng = np.random.default_rng(seed)
        detections = []
        for obj in objects:
            box = obj.box
            if jitter > 0:
                dx0, dy0, dx1, dy1 = rng.uniform(-jitter, jitter, size=4)
                box = BoundingBox(
                    max(box.x_min + dx0, 0.0),
                    max(box.y_min + dy0, 0.0),
                    max(box.x_max + dx1, box.x_min + dx0 + 1.0),
                    max(box.y_max + dy1, box.y_min + dy0 + 1.0),
                )
            detections.append(VehicleDetection(obj.category, box, obj.score))
        self._detections = detections

    def detect(self, image: np.ndarray) -> list[VehicleDetection]:
        return list(self._detections)


def mock_backend_from_scene(scene_spec, jitter: float = 0.0, seed: int = 0) -> MockDetectorBackend:
    """Backend that replays a scene spec's planted vehicles.

    scene_spec only needs an `objects` iterable of PlantedObject-shaped
    entries (category, box, score), so scenes.SceneSpec works directly.
    """
    planted = [
        PlantedObject(category=o.category, box=o.box, score=o.score) for o in scene_spec.objects
    ]
    return MockDetectorBackend(planted, jitter=jitter, seed=seed)

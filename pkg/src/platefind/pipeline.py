"""Ingestion: image -> detections -> plates -> readings -> records.

Per-vehicle failures never abort the rest of an image; they become report
entries so an operator can audit what was skipped and why.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .detection import DetectorBackend, VehicleDetection, detect_vehicles
from .errors import PlatefindError, UndecodableImage
from .localization import (
    DEFAULT_NMS_IOU,
    DEFAULT_PROB_THRESHOLD,
    PLATE_OUT_H,
    PLATE_OUT_W,
    PlateMapBackend,
    RectifiedPlate,
    localize_plate,
)
from .model import Quadrilateral
from .ocr import DEFAULT_ADAPT_THRESHOLD, CharClassifier, read_plate
from .store import RecordStore, VehicleRecord, make_record_id, now_rfc3339

STAGE_DETECTION = "vehicle_detection"
STAGE_LOCALIZATION = "plate_localization"
STAGE_OCR = "plate_ocr"
STAGE_STORE = "store"


@dataclass
class PipelineConfig:
    vehicle_backend: DetectorBackend
    plate_backend: PlateMapBackend
    classifier: CharClassifier | None
    score_threshold: float = 0.5
    prob_threshold: float = DEFAULT_PROB_THRESHOLD
    nms_iou: float = DEFAULT_NMS_IOU
    adapt_threshold: float = DEFAULT_ADAPT_THRESHOLD
    plate_w: int = PLATE_OUT_W
    plate_h: int = PLATE_OUT_H


@dataclass
class IngestReport:
    image_id: str
    vehicles_found: int = 0
    plates_read: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.plates_read > self.vehicles_found:
            raise ValueError("plates_read cannot exceed vehicles_found")

    def to_json_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "vehicles_found": self.vehicles_found,
            "plates_read": self.plates_read,
            "failures": [list(f) for f in self.failures],
        }


@dataclass
class IngestResult:
    records: list[VehicleRecord]
    report: IngestReport
    # record_id -> (vehicle RGB crop, rectified plate raster or None)
    crops: dict[str, tuple[np.ndarray, np.ndarray | None]]


def load_image(path: str | Path) -> np.ndarray:
    """Decode a JPEG/PNG file to an RGB array; UndecodableImage on failure."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImage(f"cannot decode {path}: {exc}") from exc


def decode_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImage(f"cannot decode uploaded bytes: {exc}") from exc


def _pick_plate(
    detection: VehicleDetection, plates: list[RectifiedPlate]
) -> tuple[RectifiedPlate, Quadrilateral] | None:
    """Top-scored plate whose quad center (full-image) falls inside the box."""
    x0, y0, _, _ = detection.box.pixel_extent()
    for plate in plates:
        full_quad = plate.source_quad.translated(float(x0), float(y0))
        cx, cy = full_quad.center()
        if detection.box.contains_point(cx, cy):
            return plate, full_quad
    return None


def ingest_image(
    image: np.ndarray,
    image_id: str,
    source_path: str,
    config: PipelineConfig,
    ingested_at: str | None = None,
) -> IngestResult:
    """Run the full pipeline on one decoded image.

    Raises only for an unusable image; everything downstream lands in the
    report.
    """
    report = IngestReport(image_id=image_id)
    timestamp = ingested_at or now_rfc3339()
    try:
        detections = detect_vehicles(image, config.vehicle_backend, config.score_threshold)
    except PlatefindError as exc:
        report.failures.append((STAGE_DETECTION, str(exc)))
        return IngestResult(records=[], report=report, crops={})
    report.vehicles_found = len(detections)

    picks: list[tuple[VehicleDetection, RectifiedPlate | None, Quadrilateral | None]] = []
    for det in detections:
        x0, y0, x1, y1 = det.box.pixel_extent()
        crop = image[y0:y1, x0:x1]
        try:
            plates = localize_plate(
                crop,
                config.plate_backend,
                prob_threshold=config.prob_threshold,
                iou_threshold=config.nms_iou,
                out_w=config.plate_w,
                out_h=config.plate_h,
                origin=(float(x0), float(y0)),
            )
        except PlatefindError as exc:
            report.failures.append((STAGE_LOCALIZATION, f"{det.category.label}: {exc}"))
            picks.append((det, None, None))
            continue
        chosen = _pick_plate(det, plates)
        if chosen is None:
            report.failures.append(
                (STAGE_LOCALIZATION, f"{det.category.label}: no plate located in box")
            )
            picks.append((det, None, None))
        else:
            picks.append((det, chosen[0], chosen[1]))

    # a plate binds to the smallest box containing its center
    for i, (det, plate, quad) in enumerate(picks):
        if quad is None:
            continue
        cx, cy = quad.center()
        containers = [
            d for d, _, _ in picks if d.box.contains_point(cx, cy)
        ]
        smallest = min(containers, key=lambda d: d.box.area)
        if smallest is not det:
            report.failures.append(
                (STAGE_LOCALIZATION, f"{det.category.label}: plate bound to smaller box")
            )
            picks[i] = (det, None, None)

    records: list[VehicleRecord] = []
    crops: dict[str, tuple[np.ndarray, np.ndarray | None]] = {}
    for det, plate, quad in picks:
        reading = None
        if plate is not None and config.classifier is not None:
            try:
                reading = read_plate(plate, config.classifier, config.adapt_threshold)
            except PlatefindError as exc:
                report.failures.append((STAGE_OCR, f"{det.category.label}: {exc}"))
        record_id = make_record_id(image_id, det.box, det.category)
        crop_refs = {"vehicle": f"crops/{record_id}.vehicle.jpg"}
        if plate is not None:
            crop_refs["plate"] = f"crops/{record_id}.plate.png"
        records.append(
            VehicleRecord(
                record_id=record_id,
                image_id=image_id,
                source_path=source_path,
                ingested_at=timestamp,
                category=det.category,
                box=det.box,
                detection_score=det.score,
                plate_quad=quad,
                plate_reading=reading,
                crop_refs=crop_refs,
            )
        )
        x0, y0, x1, y1 = det.box.pixel_extent()
        crops[record_id] = (image[y0:y1, x0:x1], plate.image if plate is not None else None)
    report.plates_read = sum(1 for r in records if r.plate_reading is not None)
    return IngestResult(records=records, report=report, crops=crops)


def ingest_and_store(
    source: str | Path | np.ndarray,
    config: PipelineConfig,
    store: RecordStore,
    image_id: str | None = None,
    source_path: str | None = None,
) -> tuple[list[VehicleRecord], IngestReport]:
    """Decode (if needed), ingest, persist crops and records.

    DuplicateRecordId propagates with the store untouched; UndecodableImage
    propagates for unreadable files.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        image = load_image(path)
        image_id = image_id or path.name
        source_path = source_path or str(path)
    else:
        image = source
        image_id = image_id or "inline"
        source_path = source_path or image_id
    result = ingest_image(image, image_id, source_path, config)
    store.append(result.records)
    for record in result.records:
        vehicle_img, plate_img = result.crops[record.record_id]
        store.save_crops(record.record_id, vehicle_img, plate_img)
    return result.records, result.report

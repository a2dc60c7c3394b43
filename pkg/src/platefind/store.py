"""Durable vehicle-record store: append-only JSON lines plus crop sidecars.

Layout under the store root:

    records.jsonl               one JSON object per line, "v": 1
    crops/<id>.vehicle.jpg      vehicle crop
    crops/<id>.plate.png        rectified plate (when read)

Batch appends are framed by a trailing commit line ({"v":1,"t":"commit",
"n":k}); a reader only surfaces batches whose commit made it to disk, so a
crash mid-append rolls back to the previous batch boundary instead of
exposing a partial batch. Undecodable bytes in the committed region raise
CorruptStore with the byte offset; an undecodable or uncommitted tail is
treated as a torn write and dropped.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np
from filelock import FileLock
from PIL import Image

from .errors import CorruptStore, DuplicateRecordId
from .model import BoundingBox, Quadrilateral, VehicleCategory, parse_vehicle_category
from .ocr import PlateReading, reading_from_dict, reading_to_dict

SCHEMA_VERSION = 1
RECORDS_FILE = "records.jsonl"
CROPS_DIR = "crops"


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_record_id(image_id: str, box: BoundingBox, category: VehicleCategory) -> str:
    """Content hash so re-ingesting the same detection is detectable."""
    payload = (
        f"{image_id}|{box.x_min:.3f},{box.y_min:.3f},{box.x_max:.3f},{box.y_max:.3f}"
        f"|{category.label}"
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class VehicleRecord:
    record_id: str
    image_id: str
    source_path: str
    ingested_at: str  # RFC 3339 UTC
    category: VehicleCategory
    box: BoundingBox
    detection_score: float
    plate_quad: Quadrilateral | None = None
    plate_reading: PlateReading | None = None
    crop_refs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.plate_reading is not None and self.plate_quad is None:
            raise ValueError("plate_reading requires plate_quad")
        if self.plate_quad is not None:
            cx, cy = self.plate_quad.center()
            if not self.box.contains_point(cx, cy):
                raise ValueError(
                    f"plate quad center ({cx:.1f},{cy:.1f}) outside vehicle box {self.box}"
                )

    def to_json_dict(self) -> dict:
        doc = {
            "v": SCHEMA_VERSION,
            "t": "record",
            "record_id": self.record_id,
            "image_id": self.image_id,
            "source_path": self.source_path,
            "ingested_at": self.ingested_at,
            "category": self.category.label,
            "box": list(self.box.as_tuple()),
            "detection_score": self.detection_score,
            "crop_refs": dict(self.crop_refs),
        }
        if self.plate_quad is not None:
            doc["plate_quad"] = self.plate_quad.as_list()
        if self.plate_reading is not None:
            doc["plate_reading"] = reading_to_dict(self.plate_reading)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "VehicleRecord":
        quad = None
        if doc.get("plate_quad") is not None:
            quad = Quadrilateral(tuple((float(x), float(y)) for x, y in doc["plate_quad"]))
        reading = None
        if doc.get("plate_reading") is not None:
            reading = reading_from_dict(doc["plate_reading"])
        return cls(
            record_id=str(doc["record_id"]),
            image_id=str(doc["image_id"]),
            source_path=str(doc["source_path"]),
            ingested_at=str(doc["ingested_at"]),
            category=parse_vehicle_category(doc["category"]),
            box=BoundingBox(*[float(v) for v in doc["box"]]),
            detection_score=float(doc["detection_score"]),
            plate_quad=quad,
            plate_reading=reading,
            crop_refs=dict(doc.get("crop_refs", {})),
        )


def _parse_records_file(data: bytes) -> tuple[list[VehicleRecord], int]:
    """Committed records + byte offset of the committed end.

    Raises CorruptStore for damage inside the committed region; a torn or
    uncommitted tail is dropped silently (crash recovery).
    """
    records: list[VehicleRecord] = []
    committed_end = 0
    pending: list[VehicleRecord] = []
    offset = 0
    bad_offset: int | None = None
    for raw_line in data.split(b"\n"):
        line_start = offset
        offset += len(raw_line) + 1
        # a line is complete iff it was terminated by a newline in the file
        complete = line_start + len(raw_line) < len(data)
        if not raw_line:
            continue
        try:
            doc = json.loads(raw_line.decode("utf-8"))
            if not isinstance(doc, dict) or "t" not in doc:
                raise ValueError("not a store line")
        except (ValueError, UnicodeDecodeError):
            bad_offset = line_start
            break
        if not complete:
            # terminal line without newline: torn write, drop
            break
        if doc["t"] == "record":
            pending.append(VehicleRecord.from_json_dict(doc))
        elif doc["t"] == "commit":
            if int(doc.get("n", -1)) != len(pending):
                raise CorruptStore(
                    f"commit marker expects {doc.get('n')} records, found {len(pending)}",
                    line_start,
                )
            records.extend(pending)
            pending = []
            committed_end = line_start + len(raw_line) + 1
        else:
            raise CorruptStore(f"unknown line type {doc['t']!r}", line_start)
    if bad_offset is not None:
        # damage is fatal only if committed data follows it
        rest = data[bad_offset:]
        for candidate in rest.split(b"\n"):
            try:
                doc = json.loads(candidate.decode("utf-8"))
                if isinstance(doc, dict) and doc.get("t") == "commit":
                    raise CorruptStore("undecodable line before committed data", bad_offset)
            except (ValueError, UnicodeDecodeError):
                continue
    seen: set[str] = set()
    for rec in records:
        if rec.record_id in seen:
            raise CorruptStore(f"duplicate committed record id {rec.record_id}", committed_end)
        seen.add(rec.record_id)
    return records, committed_end


class RecordStore:
    """Single-writer, multi-reader store rooted at a directory."""

    def __init__(self, root: str | Path, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / CROPS_DIR).mkdir(exist_ok=True)
        self._records_path = self.root / RECORDS_FILE
        self._lock = FileLock(str(self.root / ".writer.lock"))
        self._records: list[VehicleRecord] = []
        self._ids: set[str] = set()
        self._committed_end = 0
        self._loaded_size = -1
        self.refresh(force=True)

    @property
    def records_path(self) -> Path:
        return self._records_path

    def refresh(self, force: bool = False) -> None:
        """Re-read committed records when the file changed."""
        size = self._records_path.stat().st_size if self._records_path.exists() else 0
        if not force and size == self._loaded_size:
            return
        data = self._records_path.read_bytes() if self._records_path.exists() else b""
        self._records, self._committed_end = _parse_records_file(data)
        self._ids = {r.record_id for r in self._records}
        self._loaded_size = size

    def __len__(self) -> int:
        return len(self._records)

    def append(self, records: Sequence[VehicleRecord]) -> None:
        """Atomically append a batch; all records become visible or none.

        Raises DuplicateRecordId (leaving the store untouched) when any id
        already exists or repeats within the batch.
        """
        if not records:
            return
        with self._lock:
            self.refresh()
            duplicates = [r.record_id for r in records if r.record_id in self._ids]
            batch_ids = [r.record_id for r in records]
            duplicates += [rid for rid in batch_ids if batch_ids.count(rid) > 1]
            if duplicates:
                raise DuplicateRecordId(duplicates)
            lines = [json.dumps(r.to_json_dict(), ensure_ascii=False) for r in records]
            lines.append(json.dumps({"v": SCHEMA_VERSION, "t": "commit", "n": len(records)}))
            payload = ("\n".join(lines) + "\n").encode("utf-8")
            with open(self._records_path, "ab") as fh:
                # drop any torn tail left by a previous crash before appending
                if fh.tell() != self._committed_end:
                    fh.truncate(self._committed_end)
                    fh.seek(self._committed_end)
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            self._records.extend(records)
            self._ids.update(batch_ids)
            self._committed_end += len(payload)
            self._loaded_size = self._committed_end

    def scan(
        self, predicate: Callable[[VehicleRecord], bool] | None = None
    ) -> Iterator[VehicleRecord]:
        """Stream records in ingestion order."""
        for record in list(self._records):
            if predicate is None or predicate(record):
                yield record

    def get(self, record_id: str) -> VehicleRecord | None:
        for record in self._records:
            if record.record_id == record_id:
                return record
        return None

    # crop sidecars

    def crop_ref(self, record_id: str, kind: str) -> str:
        ext = "vehicle.jpg" if kind == "vehicle" else "plate.png"
        return f"{CROPS_DIR}/{record_id}.{ext}"

    def crop_path(self, record_id: str, kind: str) -> Path:
        return self.root / self.crop_ref(record_id, kind)

    def save_crops(
        self, record_id: str, vehicle_rgb: np.ndarray, plate_img: np.ndarray | None
    ) -> dict:
        refs = {}
        vehicle_path = self.crop_path(record_id, "vehicle")
        Image.fromarray(vehicle_rgb).convert("RGB").save(vehicle_path, format="JPEG", quality=90)
        refs["vehicle"] = self.crop_ref(record_id, "vehicle")
        if plate_img is not None:
            plate_path = self.crop_path(record_id, "plate")
            Image.fromarray(plate_img).save(plate_path, format="PNG")
            refs["plate"] = self.crop_ref(record_id, "plate")
        return refs


def load_store(path: str | Path) -> RecordStore:
    return RecordStore(path, create=True)


def append_records(store: RecordStore, records: Sequence[VehicleRecord]) -> RecordStore:
    store.append(records)
    return store


def scan(store: RecordStore, predicate=None) -> Iterator[VehicleRecord]:
    return store.scan(predicate)


def with_crop_refs(record: VehicleRecord, refs: dict) -> VehicleRecord:
    return replace(record, crop_refs=dict(refs))


__all__ = [
    "RecordStore",
    "VehicleRecord",
    "load_store",
    "append_records",
    "scan",
    "make_record_id",
    "now_rfc3339",
    "with_crop_refs",
]

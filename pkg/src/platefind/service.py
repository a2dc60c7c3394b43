"""HTTP surface: /api/v1 search, ingest, record browsing, crop serving.

Error payloads always look like {"error": {"code", "message", "field"}} with
a code from ERROR_CODES; the set is closed so clients can switch on it.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse

from . import __version__
from .config import AppConfig
from .errors import DuplicateRecordId, EmptyPlate, UndecodableImage, UnknownCategory
from .kernels import ACTIVE_IMPLEMENTATION
from .matching import ConfusionTable, SearchQuery, search
from .model import normalize_plate_string, parse_vehicle_category
from .pipeline import PipelineConfig, decode_image, ingest_and_store
from .store import RecordStore, VehicleRecord

ERROR_CODES = (
    "UnknownCategory",
    "EmptyPlate",
    "InvalidRequest",
    "UnknownRecord",
    "UnknownCrop",
    "UnknownJob",
    "UndecodableImage",
    "DuplicateRecordId",
    "IngestUnavailable",
    "StoreUnavailable",
)

MAX_PAGE_SIZE = 500


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    assert code in ERROR_CODES, f"unenumerated error code {code}"
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message, "field": field}},
    )


def record_payload(record: VehicleRecord) -> dict:
    reading = record.plate_reading
    crop_urls = {
        kind: f"/api/v1/crops/{record.record_id}/{kind}" for kind in record.crop_refs
    }
    return {
        "record_id": record.record_id,
        "image_id": record.image_id,
        "source_path": record.source_path,
        "ingested_at": record.ingested_at,
        "category": record.category.label,
        "box": list(record.box.as_tuple()),
        "detection_score": record.detection_score,
        "plate_text": reading.text if reading else None,
        "plate_confidence": reading.plate_confidence if reading else None,
        "char_confidences": [p.confidence for _, p in reading.chars] if reading else None,
        "crop_urls": crop_urls,
    }


def build_search_payload(
    store: RecordStore, table: ConfusionTable, query: SearchQuery, raw_query: dict
) -> dict:
    """Shared by the API and the CLI so both surfaces agree bit-for-bit."""
    verdict, results = search(query, store.scan(), table)
    matches = []
    for result in results:
        record: VehicleRecord = result.record
        payload = record_payload(record)
        matches.append(
            {
                "record_id": record.record_id,
                "distance": result.plate_distance,
                "category": record.category.label,
                "plate_text": payload["plate_text"],
                "char_confidences": payload["char_confidences"],
                "crop_urls": payload["crop_urls"],
            }
        )
    return {
        "verdict": "found" if verdict else "not_found",
        "matches": matches,
        "query_echo": {
            **raw_query,
            "normalized_plate": query.plate,
            "category": query.category.label,
            "confusable_pairs": [[a, b, c] for a, b, c in table.pairs],
        },
    }


def create_app(
    config: AppConfig | None = None,
    store: RecordStore | None = None,
    table: ConfusionTable | None = None,
    pipeline: PipelineConfig | None = None,
) -> FastAPI:
    config = config or AppConfig()
    if table is None:
        table = (
            ConfusionTable.from_json_file(config.confusions_path)
            if config.confusions_path
            else ConfusionTable()
        )
    app = FastAPI(title="platefind", version=__version__)
    app.state.config = config
    app.state.store = store
    app.state.table = table
    app.state.pipeline = pipeline
    app.state.jobs = {}
    app.state.job_lock = threading.Lock()

    def get_store() -> RecordStore | None:
        if app.state.store is None:
            try:
                app.state.store = RecordStore(config.store_root)
            except OSError:
                return None
        try:
            app.state.store.refresh()
        except OSError:
            return None
        return app.state.store

    @app.get("/api/v1/health")
    def health():
        current = get_store()
        return {
            "status": "ok",
            "records": len(current) if current is not None else None,
            "kernels": ACTIVE_IMPLEMENTATION,
            "version": __version__,
        }

    @app.post("/api/v1/search")
    async def api_search(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "InvalidRequest", "body must be a JSON object")
        if not isinstance(body, dict):
            return _error(400, "InvalidRequest", "body must be a JSON object")
        raw_type = body.get("type")
        raw_plate = body.get("plate", "")
        try:
            category = parse_vehicle_category(str(raw_type))
        except UnknownCategory as exc:
            return _error(400, "UnknownCategory", str(exc), field="type")
        try:
            plate = normalize_plate_string(str(raw_plate))
        except EmptyPlate as exc:
            return _error(400, "EmptyPlate", str(exc), field="plate")
        try:
            fuzz = float(body.get("fuzz", config.fuzz_default))
            limit = int(body.get("limit", 20))
            query = SearchQuery(category=category, plate=plate, fuzz_budget=fuzz, limit=limit)
        except (TypeError, ValueError) as exc:
            return _error(400, "InvalidRequest", str(exc))
        if limit > MAX_PAGE_SIZE:
            return _error(400, "InvalidRequest", f"limit must be <= {MAX_PAGE_SIZE}", field="limit")
        current = get_store()
        if current is None:
            return _error(503, "StoreUnavailable", "record store is not reachable")
        raw_query = {
            "type": raw_type,
            "plate": raw_plate,
            "fuzz": fuzz,
            "limit": limit,
        }
        return build_search_payload(current, app.state.table, query, raw_query)

    def _run_ingest(source, image_id: str | None):
        current = get_store()
        if current is None:
            raise OSError("store unavailable")
        _, report = ingest_and_store(
            source, app.state.pipeline, current, image_id=image_id
        )
        return report

    @app.post("/api/v1/ingest")
    async def api_ingest(request: Request, file: Optional[UploadFile] = File(None)):
        if app.state.pipeline is None:
            return _error(503, "IngestUnavailable", "no ingest pipeline configured")
        if file is not None:
            try:
                source = decode_image(await file.read())
            except UndecodableImage as exc:
                return _error(415, "UndecodableImage", str(exc))
            image_id = file.filename or "upload"
        else:
            try:
                body = await request.json()
            except Exception:
                return _error(400, "InvalidRequest", "expected multipart file or JSON {path}")
            path = body.get("path") if isinstance(body, dict) else None
            if not path:
                return _error(400, "InvalidRequest", "expected multipart file or JSON {path}")
            source = Path(path)
            if not source.exists():
                return _error(415, "UndecodableImage", f"no such file: {path}")
            image_id = None

        if config.async_ingest:
            job_id = uuid.uuid4().hex[:12]
            with app.state.job_lock:
                app.state.jobs[job_id] = {"status": "pending"}

            def work():
                try:
                    report = _run_ingest(source, image_id)
                    outcome = {"status": "done", "report": report.to_json_dict()}
                except Exception as exc:  # noqa: BLE001 - job surface reports all
                    outcome = {"status": "error", "message": str(exc)}
                with app.state.job_lock:
                    app.state.jobs[job_id] = outcome

            threading.Thread(target=work, daemon=True).start()
            return JSONResponse(status_code=202, content={"job_id": job_id})

        try:
            report = _run_ingest(source, image_id)
        except UndecodableImage as exc:
            return _error(415, "UndecodableImage", str(exc))
        except DuplicateRecordId as exc:
            return _error(409, "DuplicateRecordId", str(exc))
        except OSError:
            return _error(503, "StoreUnavailable", "record store is not reachable")
        return report.to_json_dict()

    @app.get("/api/v1/jobs/{job_id}")
    def api_job(job_id: str):
        with app.state.job_lock:
            job = app.state.jobs.get(job_id)
        if job is None:
            return _error(404, "UnknownJob", f"no such job {job_id}")
        return {"job_id": job_id, **job}

    @app.get("/api/v1/records")
    def api_records(offset: int = 0, count: int = 100):
        if offset < 0 or count < 1:
            return _error(400, "InvalidRequest", "offset must be >= 0 and count >= 1")
        count = min(count, MAX_PAGE_SIZE)
        current = get_store()
        if current is None:
            return _error(503, "StoreUnavailable", "record store is not reachable")
        records = list(current.scan())
        page = records[offset : offset + count]
        return {
            "total": len(records),
            "offset": offset,
            "count": len(page),
            "records": [record_payload(r) for r in page],
        }

    @app.get("/api/v1/crops/{record_id}/{kind}")
    def api_crop(record_id: str, kind: str):
        current = get_store()
        if current is None:
            return _error(503, "StoreUnavailable", "record store is not reachable")
        record = current.get(record_id)
        if record is None:
            return _error(404, "UnknownRecord", f"no such record {record_id}")
        if kind not in ("vehicle", "plate") or kind not in record.crop_refs:
            return _error(404, "UnknownCrop", f"record {record_id} has no {kind} crop")
        path = current.root / record.crop_refs[kind]
        if not path.exists():
            return _error(404, "UnknownCrop", f"crop file missing for {record_id}/{kind}")
        media = "image/jpeg" if path.suffix == ".jpg" else "image/png"
        return FileResponse(path, media_type=media)

    return app

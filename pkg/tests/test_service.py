import io
import json
import os
import time

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from platefind.config import AppConfig
from platefind.detection import mock_backend_from_scene
from platefind.pipeline import PipelineConfig
from platefind.scenes import ScenePlateMapBackend, generate_scene, render_scene
from platefind.service import ERROR_CODES, create_app
from platefind.store import RecordStore

from .contracts_util import CONTRACTS_DIR, RECORD_PAGES, SEARCH_FIXTURES, build_contract_store


@pytest.fixture()
def contract_client(tmp_path):
    store = build_contract_store(tmp_path / "store")
    app = create_app(AppConfig(store_root=str(tmp_path / "store")), store=store)
    return TestClient(app)


@pytest.fixture()
def scene_client(tmp_path, trained_classifier):
    spec = generate_scene(41)
    store = RecordStore(tmp_path / "store")
    pipeline = PipelineConfig(
        vehicle_backend=mock_backend_from_scene(spec),
        plate_backend=ScenePlateMapBackend(spec),
        classifier=trained_classifier,
    )
    app = create_app(
        AppConfig(store_root=str(tmp_path / "store")), store=store, pipeline=pipeline
    )
    return TestClient(app), spec, store


def _scene_png_bytes(spec):
    image = render_scene(spec)
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


class TestSearchEndpoint:
    def test_exact_hit(self, contract_client):
        response = contract_client.post(
            "/api/v1/search", json={"type": "4-wheeler", "plate": "KA01MJ2022", "fuzz": 0}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["verdict"] == "found"
        assert len(body["matches"]) == 1
        assert body["matches"][0]["distance"] == 0.0
        assert body["matches"][0]["plate_text"] == "KA01MJ2022"

    def test_verdict_iff_matches_nonempty(self, contract_client):
        for fixture in SEARCH_FIXTURES.values():
            body = contract_client.post("/api/v1/search", json=fixture).json()
            assert (body["verdict"] == "found") == bool(body["matches"])

    def test_unknown_category_400(self, contract_client):
        response = contract_client.post(
            "/api/v1/search", json={"type": "boat", "plate": "AB12", "fuzz": 0}
        )
        assert response.status_code == 400
        error = response.json()["error"]
        assert error["code"] == "UnknownCategory"
        assert error["field"] == "type"

    def test_empty_plate_400(self, contract_client):
        response = contract_client.post(
            "/api/v1/search", json={"type": "4-wheeler", "plate": "---", "fuzz": 0}
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "EmptyPlate"

    def test_bad_fuzz_400(self, contract_client):
        response = contract_client.post(
            "/api/v1/search", json={"type": "4-wheeler", "plate": "AB12", "fuzz": -1}
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "InvalidRequest"

    def test_mn_budget_over_http(self, contract_client):
        tight = contract_client.post(
            "/api/v1/search", json={"type": "4-wheeler", "plate": "MH12MM00", "fuzz": 0.4}
        ).json()
        wide = contract_client.post(
            "/api/v1/search", json={"type": "4-wheeler", "plate": "MH12MM00", "fuzz": 0.5}
        ).json()
        assert tight["verdict"] == "not_found"
        assert wide["verdict"] == "found"
        assert wide["matches"][0]["distance"] == 0.5

    def test_query_echo_carries_confusables(self, contract_client):
        body = contract_client.post(
            "/api/v1/search", json={"type": "4-wheeler", "plate": "ka 01 mj 2022"}
        ).json()
        echo = body["query_echo"]
        assert echo["plate"] == "ka 01 mj 2022"
        assert echo["normalized_plate"] == "KA01MJ2022"
        assert ["M", "N", 0.25] in echo["confusable_pairs"]


class TestRecordsAndCrops:
    def test_pagination_complete_and_disjoint(self, contract_client):
        pages = []
        offset = 0
        while True:
            body = contract_client.get(f"/api/v1/records?offset={offset}&count=2").json()
            pages.extend(body["records"])
            offset += body["count"]
            if offset >= body["total"]:
                break
        full = contract_client.get("/api/v1/records?offset=0&count=500").json()["records"]
        assert [r["record_id"] for r in pages] == [r["record_id"] for r in full]
        assert len({r["record_id"] for r in pages}) == len(pages)

    def test_invalid_pagination_400(self, contract_client):
        assert contract_client.get("/api/v1/records?offset=-1").status_code == 400
        assert contract_client.get("/api/v1/records?count=0").status_code == 400

    def test_crop_unknown_record_404(self, contract_client):
        response = contract_client.get("/api/v1/crops/ffffffffffffffff/vehicle")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "UnknownRecord"

    def test_crop_missing_plate_404(self, contract_client):
        records = contract_client.get("/api/v1/records?count=500").json()["records"]
        no_plate = next(r for r in records if r["plate_text"] is None)
        response = contract_client.get(f"/api/v1/crops/{no_plate['record_id']}/plate")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "UnknownCrop"

    def test_health(self, contract_client):
        body = contract_client.get("/api/v1/health").json()
        assert body["status"] == "ok"
        assert body["records"] == 5


class TestIngestEndpoint:
    def test_ingest_then_visible_in_records(self, scene_client):
        client, spec, _ = scene_client
        response = client.post(
            "/api/v1/ingest",
            files={"file": ("scene.png", _scene_png_bytes(spec), "image/png")},
        )
        assert response.status_code == 200
        report = response.json()
        assert report["vehicles_found"] == len(spec.objects)
        records = client.get("/api/v1/records").json()["records"]
        assert len(records) == len(spec.objects)
        texts = {r["plate_text"] for r in records if r["plate_text"]}
        assert texts == {o.plate.text for o in spec.objects if o.plate}

    def test_crop_bytes_served(self, scene_client):
        client, spec, _ = scene_client
        client.post(
            "/api/v1/ingest", files={"file": ("scene.png", _scene_png_bytes(spec), "image/png")}
        )
        record = client.get("/api/v1/records").json()["records"][0]
        vehicle = client.get(record["crop_urls"]["vehicle"])
        assert vehicle.status_code == 200
        assert vehicle.headers["content-type"] == "image/jpeg"
        assert Image.open(io.BytesIO(vehicle.content)).size[0] > 10
        if "plate" in record["crop_urls"]:
            plate = client.get(record["crop_urls"]["plate"])
            assert plate.status_code == 200
            assert plate.headers["content-type"] == "image/png"

    def test_reingest_conflicts_and_leaves_store_unchanged(self, scene_client):
        client, spec, store = scene_client
        payload = _scene_png_bytes(spec)
        first = client.post("/api/v1/ingest", files={"file": ("s.png", payload, "image/png")})
        assert first.status_code == 200
        before = store.records_path.read_bytes()
        again = client.post("/api/v1/ingest", files={"file": ("s.png", payload, "image/png")})
        assert again.status_code == 409
        assert again.json()["error"]["code"] == "DuplicateRecordId"
        assert store.records_path.read_bytes() == before

    def test_undecodable_upload_415(self, scene_client):
        client, _, _ = scene_client
        response = client.post(
            "/api/v1/ingest", files={"file": ("junk.jpg", b"not an image", "image/jpeg")}
        )
        assert response.status_code == 415
        assert response.json()["error"]["code"] == "UndecodableImage"

    def test_ingest_by_path(self, scene_client, tmp_path):
        client, spec, _ = scene_client
        path = tmp_path / "scene.png"
        path.write_bytes(_scene_png_bytes(spec))
        response = client.post("/api/v1/ingest", json={"path": str(path)})
        assert response.status_code == 200

    def test_no_pipeline_503(self, contract_client):
        response = contract_client.post("/api/v1/ingest", json={"path": "/nowhere.jpg"})
        assert response.status_code == 503
        assert response.json()["error"]["code"] == "IngestUnavailable"

    def test_async_mode_returns_job(self, tmp_path, trained_classifier):
        spec = generate_scene(42)
        store = RecordStore(tmp_path / "store")
        pipeline = PipelineConfig(
            vehicle_backend=mock_backend_from_scene(spec),
            plate_backend=ScenePlateMapBackend(spec),
            classifier=trained_classifier,
        )
        app = create_app(
            AppConfig(store_root=str(tmp_path / "store"), async_ingest=True),
            store=store,
            pipeline=pipeline,
        )
        client = TestClient(app)
        response = client.post(
            "/api/v1/ingest", files={"file": ("s.png", _scene_png_bytes(spec), "image/png")}
        )
        assert response.status_code == 202
        job_id = response.json()["job_id"]
        for _ in range(100):
            body = client.get(f"/api/v1/jobs/{job_id}").json()
            if body["status"] != "pending":
                break
            time.sleep(0.05)
        assert body["status"] == "done"
        assert body["report"]["vehicles_found"] == len(spec.objects)
        assert client.get("/api/v1/jobs/nope").status_code == 404


class TestCliAgreement:
    def test_api_and_cli_search_agree_bitwise(self, tmp_path):
        from click.testing import CliRunner

        from platefind.cli import main

        store = build_contract_store(tmp_path / "store")
        app = create_app(AppConfig(store_root=str(tmp_path / "store")), store=store)
        client = TestClient(app)
        query = {"type": "4-wheeler", "plate": "MH12MM00", "fuzz": 0.5, "limit": 20}
        api_body = client.post("/api/v1/search", json=query).json()

        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "search",
                "--type",
                query["type"],
                "--plate",
                query["plate"],
                "--fuzz",
                str(query["fuzz"]),
                "--limit",
                str(query["limit"]),
                "--json",
                "--store",
                str(tmp_path / "store"),
            ],
        )
        assert result.exit_code == 0
        cli_body = json.loads(result.output)
        assert cli_body["verdict"] == api_body["verdict"]
        assert [m["record_id"] for m in cli_body["matches"]] == [
            m["record_id"] for m in api_body["matches"]
        ]
        assert [m["distance"] for m in cli_body["matches"]] == [
            m["distance"] for m in api_body["matches"]
        ]


class TestFrozenContract:
    """The fixtures under contracts/api_v1 are the UI's build target."""

    def _live_payloads(self, client):
        payloads = {}
        for name, request in SEARCH_FIXTURES.items():
            payloads[name] = {
                "request": {"method": "POST", "path": "/api/v1/search", "body": request},
                "response": client.post("/api/v1/search", json=request).json(),
            }
        for name, (offset, count) in RECORD_PAGES.items():
            path = f"/api/v1/records?offset={offset}&count={count}"
            payloads[name] = {
                "request": {"method": "GET", "path": path},
                "response": client.get(path).json(),
            }
        empty_query = {"type": "4-wheeler", "plate": "ZZ0099", "fuzz": 0.0, "limit": 20}
        payloads["search_empty_result"] = {
            "request": {"method": "POST", "path": "/api/v1/search", "body": empty_query},
            "response": client.post("/api/v1/search", json=empty_query).json(),
        }
        return payloads

    def test_contract_fixtures_frozen(self, contract_client):
        payloads = self._live_payloads(contract_client)
        if os.environ.get("PF_FREEZE_CONTRACTS"):
            CONTRACTS_DIR.mkdir(parents=True, exist_ok=True)
            for name, payload in payloads.items():
                (CONTRACTS_DIR / f"{name}.json").write_text(
                    json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
                )
            pytest.skip("contract fixtures regenerated")
        for name, payload in payloads.items():
            frozen = json.loads((CONTRACTS_DIR / f"{name}.json").read_text(encoding="utf-8"))
            assert frozen == payload, f"contract drift in {name}"

    def test_error_codes_are_enumerated(self, contract_client):
        # exercise every 4xx path and confirm codes stay within the closed set
        responses = [
            contract_client.post("/api/v1/search", json={"type": "boat", "plate": "A"}),
            contract_client.post("/api/v1/search", json={"type": "4-wheeler", "plate": "--"}),
            contract_client.post("/api/v1/search", json={"type": "4-wheeler", "plate": "A", "fuzz": -2}),
            contract_client.get("/api/v1/records?offset=-5"),
            contract_client.get("/api/v1/crops/ffffffffffffffff/vehicle"),
            contract_client.get("/api/v1/jobs/nope"),
        ]
        for response in responses:
            assert 400 <= response.status_code < 500
            assert response.json()["error"]["code"] in ERROR_CODES

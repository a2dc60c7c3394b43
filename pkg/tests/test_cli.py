import json

import numpy as np
import pytest
from click.testing import CliRunner

from platefind.classifier import MLPCharClassifier
from platefind.cli import main
from platefind.store import RecordStore

from .conftest import make_record


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def small_store(tmp_path):
    store = RecordStore(tmp_path / "store")
    store.append(
        [
            make_record("a.jpg", "KA01MJ2022"),
            make_record("b.jpg", "MH12NN00", offset=3),
        ]
    )
    return tmp_path / "store"


class TestSearchCommand:
    def test_hit_exits_zero(self, runner, small_store):
        result = runner.invoke(
            main, ["search", "--type", "4-wheeler", "--plate", "KA01MJ2022", "--store", str(small_store)]
        )
        assert result.exit_code == 0
        assert "FOUND" in result.output

    def test_miss_exits_three(self, runner, small_store):
        result = runner.invoke(
            main, ["search", "--type", "4-wheeler", "--plate", "ZZ9999", "--store", str(small_store)]
        )
        assert result.exit_code == 3
        assert "NOT_FOUND" in result.output

    def test_mn_budget_exit_codes(self, runner, small_store):
        tight = runner.invoke(
            main,
            ["search", "--type", "4-wheeler", "--plate", "MH12MM00", "--fuzz", "0.4",
             "--store", str(small_store)],
        )
        wide = runner.invoke(
            main,
            ["search", "--type", "4-wheeler", "--plate", "MH12MM00", "--fuzz", "0.5",
             "--store", str(small_store)],
        )
        assert tight.exit_code == 3
        assert wide.exit_code == 0

    def test_unknown_category_usage_error(self, runner, small_store):
        result = runner.invoke(
            main, ["search", "--type", "boat", "--plate", "A1", "--store", str(small_store)]
        )
        assert result.exit_code == 2

    def test_negative_fuzz_usage_error(self, runner, small_store):
        result = runner.invoke(
            main,
            ["search", "--type", "4-wheeler", "--plate", "A1", "--fuzz", "-1",
             "--store", str(small_store)],
        )
        assert result.exit_code == 2

    def test_json_output_shape(self, runner, small_store):
        result = runner.invoke(
            main,
            ["search", "--type", "4-wheeler", "--plate", "KA01MJ2022", "--json",
             "--store", str(small_store)],
        )
        body = json.loads(result.output)
        assert body["verdict"] == "found"
        assert body["matches"][0]["plate_text"] == "KA01MJ2022"


class TestEvalCommand:
    def test_hand_derived_f1(self, runner, tmp_path):
        # TP=5 FP=3 FN=2 -> F1 = 0.6667
        via = {}
        preds = []
        regions = []
        for i in range(7):
            regions.append(
                {
                    "shape_attributes": {
                        "name": "rect", "x": 30 * i, "y": 10, "width": 20, "height": 30,
                    },
                    "region_attributes": {"type": "4-wheeler"},
                }
            )
        via["img.jpg1"] = {"filename": "img.jpg", "size": 1, "regions": regions}
        for i in range(5):  # matched
            preds.append(
                {"image_id": "img.jpg", "category": "4-wheeler",
                 "box": [30 * i, 10, 30 * i + 20, 40], "score": 0.9}
            )
        for i in range(3):  # far away
            preds.append(
                {"image_id": "img.jpg", "category": "4-wheeler",
                 "box": [30 * i, 300, 30 * i + 20, 330], "score": 0.8}
            )
        annotations = tmp_path / "via.json"
        annotations.write_text(json.dumps(via), encoding="utf-8")
        predictions = tmp_path / "preds.jsonl"
        predictions.write_text("\n".join(json.dumps(p) for p in preds), encoding="utf-8")

        result = runner.invoke(
            main, ["eval", "--annotations", str(annotations), "--predictions", str(predictions)]
        )
        assert result.exit_code == 0
        overall = next(l for l in result.output.splitlines() if l.startswith("overall"))
        f1 = float(overall.split()[3])
        assert abs(f1 - 0.6667) <= 1e-4

    def test_bad_prediction_line_usage_error(self, runner, tmp_path):
        annotations = tmp_path / "via.json"
        annotations.write_text("{}", encoding="utf-8")
        predictions = tmp_path / "preds.jsonl"
        predictions.write_text('{"image_id": "x"}', encoding="utf-8")
        result = runner.invoke(
            main, ["eval", "--annotations", str(annotations), "--predictions", str(predictions)]
        )
        assert result.exit_code == 2


class TestTrainOcrCommand:
    def test_tiny_training_run(self, runner, tmp_path):
        out = tmp_path / "model.bin"
        result = runner.invoke(
            main, ["train-ocr", "--out", str(out), "--count", "60", "--seed", "1", "--epochs", "2"]
        )
        assert result.exit_code == 0, result.output
        assert out.exists()
        model = MLPCharClassifier.load(out)
        assert model.predict_proba(np.zeros((1, 32, 32), dtype=np.float32)).shape == (1, 36)
        assert "held-out glyph accuracy" in result.output


class TestSceneWorkflow:
    """gen-scenes -> train-detector -> ingest -> search, all through the CLI."""

    def test_full_flow(self, runner, tmp_path):
        scenes_dir = tmp_path / "scenes"
        result = runner.invoke(
            main, ["gen-scenes", "--out", str(scenes_dir), "--count", "2", "--seed", "500"]
        )
        assert result.exit_code == 0, result.output
        assert (scenes_dir / "via.json").exists()
        queries = [
            json.loads(line)
            for line in (scenes_dir / "queries.jsonl").read_text().splitlines()
        ]
        assert queries

        from platefind.detection import load_via_annotations

        via_doc = json.loads((scenes_dir / "via.json").read_text(encoding="utf-8"))
        regions = load_via_annotations(via_doc)
        assert regions

        detector_path = tmp_path / "det.npz"
        result = runner.invoke(
            main,
            ["train-detector", "--out", str(detector_path), "--scenes", "40", "--seed", "2"],
        )
        assert result.exit_code == 0, result.output

        model_path = tmp_path / "model.bin"
        result = runner.invoke(
            main,
            ["train-ocr", "--out", str(model_path), "--count", "800", "--seed", "3",
             "--epochs", "10"],
        )
        assert result.exit_code == 0, result.output

        store_root = tmp_path / "store"
        result = runner.invoke(
            main,
            ["ingest", str(scenes_dir), "--store", str(store_root),
             "--detector", str(detector_path), "--ocr-model", str(model_path)],
        )
        assert result.exit_code == 0, result.output
        assert "vehicles=" in result.output

        store = RecordStore(store_root)
        assert len(store) > 0

        # re-ingest: duplicates are reported, exit stays 0
        result = runner.invoke(
            main,
            ["ingest", str(scenes_dir), "--store", str(store_root),
             "--detector", str(detector_path), "--ocr-model", str(model_path)],
        )
        assert result.exit_code == 0
        assert "duplicate record ids" in result.output

        # an undecodable file flips the exit code
        (scenes_dir / "broken.jpg").write_bytes(b"junk")
        result = runner.invoke(
            main,
            ["ingest", str(scenes_dir), "--store", str(tmp_path / "store2"),
             "--detector", str(detector_path)],
        )
        assert result.exit_code == 1
        assert "UNDECODABLE" in result.output


class TestConfig:
    def test_key_value_file_and_env_override(self, tmp_path, monkeypatch):
        from platefind.config import load_config

        path = tmp_path / "platefind.conf"
        path.write_text(
            "# comment\nstore_root = /data/store\nadapt_threshold = 0.7\nasync_ingest = true\n",
            encoding="utf-8",
        )
        config = load_config(path, environ={})
        assert config.store_root == "/data/store"
        assert config.adapt_threshold == 0.7
        assert config.async_ingest is True

        config = load_config(path, environ={"PF_STORE_ROOT": "/other", "PF_NMS_IOU": "0.2"})
        assert config.store_root == "/other"
        assert config.nms_iou == 0.2

    def test_json_config(self, tmp_path):
        from platefind.config import load_config

        path = tmp_path / "config.json"
        path.write_text(json.dumps({"port": 9001, "fuzz_default": 0.25}), encoding="utf-8")
        config = load_config(path, environ={})
        assert config.port == 9001
        assert config.fuzz_default == 0.25

    def test_unknown_key_rejected(self, tmp_path):
        from platefind.config import load_config

        path = tmp_path / "bad.conf"
        path.write_text("no_such_key = 1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="no_such_key"):
            load_config(path, environ={})

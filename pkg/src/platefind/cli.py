"""Command-line surface: ingest, search, eval, train, serve, gen-scenes.

Exit codes: 0 success (search: found), 2 usage error, 3 search completed but
nothing found. `ingest` exits non-zero only when an image failed to decode.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from .backends import BrightRectPlateBackend, ReferenceBlobDetector, train_reference_detector
from .classifier import MLPCharClassifier, train_char_classifier
from .config import load_config
from .detection import VehicleDetection, evaluate_f1, load_via_annotations
from .errors import DuplicateRecordId, EmptyPlate, PlatefindError, UndecodableImage, UnknownCategory
from .matching import ConfusionTable, SearchQuery
from .model import BoundingBox, VehicleCategory, normalize_plate_string, parse_vehicle_category
from .pipeline import PipelineConfig, ingest_image, load_image
from .store import RecordStore
from .synth import PlateSynthSpec, build_glyph_dataset

EXIT_NOT_FOUND = 3

_IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


def _load_table(confusions: str | None) -> ConfusionTable:
    return ConfusionTable.from_json_file(confusions) if confusions else ConfusionTable()


@click.group()
def main():
    """Vehicle search: ingest images, read plates, query by type + plate."""


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--store", "store_root", default="store", show_default=True, help="Store root.")
@click.option("--detector", "detector_path", required=True, type=click.Path(exists=True),
              help="Trained reference detector (see train-detector).")
@click.option("--ocr-model", "model_path", type=click.Path(exists=True),
              help="Trained glyph classifier; omit to skip plate reading.")
@click.option("--score-threshold", default=0.5, show_default=True)
@click.option("--jobs", default=1, show_default=True, help="Parallel image workers.")
def ingest(directory: Path, store_root: str, detector_path: str, model_path: str | None,
           score_threshold: float, jobs: int):
    """Ingest every image under DIRECTORY (recursive) into the store."""
    store = RecordStore(store_root)
    config = PipelineConfig(
        vehicle_backend=ReferenceBlobDetector.load(detector_path),
        plate_backend=BrightRectPlateBackend(),
        classifier=MLPCharClassifier.load(model_path) if model_path else None,
        score_threshold=score_threshold,
    )
    paths = sorted(p for p in directory.rglob("*") if p.suffix.lower() in _IMAGE_SUFFIXES)
    had_undecodable = False

    def compute(path: Path):
        try:
            image = load_image(path)
        except UndecodableImage as exc:
            return path, None, exc
        return path, ingest_image(image, path.name, str(path), config), None

    if jobs <= 1:
        outcomes = map(compute, paths)
    else:
        # compute in a pool, append in submission order (single writer)
        with ThreadPoolExecutor(jobs) as pool:
            outcomes = list(pool.map(compute, paths))
    for path, result, error in outcomes:
        if error is not None:
            had_undecodable = True
            click.echo(f"{path.name}: UNDECODABLE ({error})", err=True)
            continue
        try:
            store.append(result.records)
            for record in result.records:
                vehicle_img, plate_img = result.crops[record.record_id]
                store.save_crops(record.record_id, vehicle_img, plate_img)
        except DuplicateRecordId as exc:
            result.report.failures.append(("store", str(exc)))
        report = result.report
        failures = "; ".join(f"{stage}: {msg}" for stage, msg in report.failures)
        click.echo(
            f"{report.image_id}: vehicles={report.vehicles_found} "
            f"plates_read={report.plates_read}"
            + (f" failures=[{failures}]" if failures else "")
        )
    sys.exit(1 if had_undecodable else 0)


@main.command()
@click.option("--type", "type_label", required=True, help="Vehicle type, e.g. '4-wheeler'.")
@click.option("--plate", required=True, help="Plate text to look for.")
@click.option("--fuzz", default=None, type=float, help="Fuzzy match budget (default 0 = exact).")
@click.option("--limit", default=20, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit the API search payload as JSON.")
@click.option("--store", "store_root", default=None, help="Store root (default from config).")
@click.option("--confusions", default=None, type=click.Path(exists=True),
              help="Confusion table JSON (default: built-in table).")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def search(type_label: str, plate: str, fuzz: float | None, limit: int, as_json: bool,
           store_root: str | None, confusions: str | None, config_path: str | None):
    """Search the store; exit 0 when found, 3 when not found."""
    from .service import build_search_payload

    app_config = load_config(config_path)
    try:
        category = parse_vehicle_category(type_label)
        normalized = normalize_plate_string(plate)
    except (UnknownCategory, EmptyPlate) as exc:
        raise click.UsageError(str(exc))
    fuzz_value = app_config.fuzz_default if fuzz is None else fuzz
    if fuzz_value < 0:
        raise click.UsageError("--fuzz must be >= 0")
    if limit < 1:
        raise click.UsageError("--limit must be >= 1")
    table = _load_table(confusions or app_config.confusions_path)
    store = RecordStore(store_root or app_config.store_root)
    query = SearchQuery(category=category, plate=normalized, fuzz_budget=fuzz_value, limit=limit)
    payload = build_search_payload(
        store, table, query, {"type": type_label, "plate": plate, "fuzz": fuzz_value, "limit": limit}
    )
    if as_json:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(f"verdict: {payload['verdict'].upper()}")
        for match in payload["matches"]:
            click.echo(
                f"  {match['record_id']}  d={match['distance']:g}  "
                f"{match['category']}  {match['plate_text']}"
            )
    sys.exit(0 if payload["verdict"] == "found" else EXIT_NOT_FOUND)


@main.command("eval")
@click.option("--annotations", required=True, type=click.Path(exists=True),
              help="VIA rectangular annotation JSON.")
@click.option("--predictions", required=True, type=click.Path(exists=True),
              help="JSONL: {image_id, category, box: [x0,y0,x1,y1], score}.")
@click.option("--iou", default=0.5, show_default=True)
def eval_cmd(annotations: str, predictions: str, iou: float):
    """Evaluate detection predictions against VIA ground truth."""
    truth_doc = json.loads(Path(annotations).read_text(encoding="utf-8"))
    truth = load_via_annotations(truth_doc)
    truth_map: dict[str, list] = {}
    for entry in truth_doc.values():
        truth_map.setdefault(str(entry["filename"]), [])
    for region in truth:
        truth_map[region.image_id].append(region)

    preds: dict[str, list[VehicleDetection]] = {}
    with open(predictions, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                detection = VehicleDetection(
                    category=parse_vehicle_category(doc["category"]),
                    box=BoundingBox(*[float(v) for v in doc["box"]]),
                    score=float(doc.get("score", 1.0)),
                )
            except (KeyError, TypeError, ValueError, PlatefindError) as exc:
                raise click.UsageError(f"{predictions}:{lineno}: bad prediction line: {exc}")
            preds.setdefault(str(doc["image_id"]), []).append(detection)

    metrics = evaluate_f1(preds, truth_map, iou_threshold=iou)
    click.echo(f"{'category':<12} {'prec':>7} {'recall':>7} {'f1':>7} {'tp':>4} {'fp':>4} {'fn':>4}")
    for cat in VehicleCategory:
        b = metrics.per_category[cat]
        click.echo(
            f"{cat.label:<12} {b.precision:>7.4f} {b.recall:>7.4f} {b.f1:>7.4f} "
            f"{b.true_positives:>4} {b.false_positives:>4} {b.false_negatives:>4}"
        )
    o = metrics.overall
    click.echo(
        f"{'overall':<12} {o.precision:>7.4f} {o.recall:>7.4f} {o.f1:>7.4f} "
        f"{o.true_positives:>4} {o.false_positives:>4} {o.false_negatives:>4}"
    )


@main.command("train-ocr")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--count", default=2500, show_default=True, help="Training plates to render.")
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=25, show_default=True)
def train_ocr(out_path: str, count: int, seed: int, epochs: int):
    """Train the 36-class glyph classifier on synthetic plates."""
    spec = PlateSynthSpec(char_sampling="balanced")
    glyphs, labels = build_glyph_dataset(count, seed, spec)
    click.echo(f"dataset: {len(labels)} glyphs, min per class "
               f"{int(np.bincount(labels, minlength=36).min())}")
    model = train_char_classifier(glyphs, labels, seed=seed, epochs=epochs)
    model.save(out_path)
    held_x, held_y = build_glyph_dataset(max(count // 10, 20), seed + 10_000, spec)
    accuracy = float((model.predict(held_x) == held_y).mean())
    click.echo(f"held-out glyph accuracy: {accuracy:.4f}")
    click.echo(f"saved {out_path}")


@main.command("train-detector")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--scenes", "n_scenes", default=120, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_detector(out_path: str, n_scenes: int, seed: int):
    """Train the reference blob detector's category head on synthetic scenes."""
    from .scenes import generate_scene

    specs = [generate_scene(seed * 100_000 + i) for i in range(n_scenes)]
    detector = train_reference_detector(specs, seed=seed)
    detector.save(out_path)
    click.echo(f"saved {out_path} (trained on {n_scenes} scenes)")


@main.command("gen-scenes")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--count", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Seed of the first scene.")
def gen_scenes(out_dir: Path, count: int, seed: int):
    """Render synthetic scenes + VIA annotations + ground-truth queries."""
    from PIL import Image

    from .scenes import generate_scene, render_scene

    out_dir.mkdir(parents=True, exist_ok=True)
    via: dict = {}
    with open(out_dir / "queries.jsonl", "w", encoding="utf-8") as queries:
        for i in range(count):
            spec = generate_scene(seed + i)
            name = f"{spec.image_id}.jpg"
            Image.fromarray(render_scene(spec)).save(out_dir / name, quality=95)
            via[name] = {
                "filename": name,
                "size": (out_dir / name).stat().st_size,
                "regions": [
                    {
                        "shape_attributes": {
                            "name": "rect",
                            "x": int(o.box.x_min),
                            "y": int(o.box.y_min),
                            "width": int(o.box.width),
                            "height": int(o.box.height),
                        },
                        "region_attributes": {"type": o.category.label},
                    }
                    for o in spec.objects
                ],
            }
            for obj in spec.objects:
                if obj.plate is not None:
                    queries.write(
                        json.dumps(
                            {"image": name, "type": obj.category.label, "plate": obj.plate.text}
                        )
                        + "\n"
                    )
    (out_dir / "via.json").write_text(json.dumps(via, indent=2), encoding="utf-8")
    click.echo(f"wrote {count} scenes to {out_dir}")


@main.command()
@click.option("--store", "store_root", default=None)
@click.option("--port", default=None, type=int)
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--confusions", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def serve(store_root, port, model_path, confusions, config_path):
    """Serve the HTTP API over the store."""
    import uvicorn

    from .service import create_app

    app_config = load_config(config_path)
    if store_root:
        app_config.store_root = store_root
    if port:
        app_config.port = port
    if model_path:
        app_config.model_path = model_path
    if confusions:
        app_config.confusions_path = confusions
    uvicorn.run(create_app(app_config), host="127.0.0.1", port=app_config.port)


if __name__ == "__main__":
    main()

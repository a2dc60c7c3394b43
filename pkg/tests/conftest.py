"""Shared fixtures: trained glyph model, scene corpus, record builders."""

from __future__ import annotations

import numpy as np
import pytest

from platefind.classifier import MLPCharClassifier, train_char_classifier
from platefind.model import BoundingBox, Quadrilateral, VehicleCategory
from platefind.ocr import PlateReading, reading_from_dict
from platefind.scenes import SceneSpec, generate_scene, render_scene
from platefind.store import VehicleRecord, make_record_id
from platefind.synth import PlateSynthSpec, build_glyph_dataset

TRAIN_SEED = 7
TRAIN_PLATES = 2400  # balanced sampling -> >=500 glyphs per class


@pytest.fixture(scope="session")
def trained_classifier() -> MLPCharClassifier:
    spec = PlateSynthSpec(char_sampling="balanced")
    glyphs, labels = build_glyph_dataset(TRAIN_PLATES, TRAIN_SEED, spec)
    counts = np.bincount(labels, minlength=36)
    assert counts.min() >= 500, f"training set underfilled: min {counts.min()} per class"
    return train_char_classifier(glyphs, labels, seed=TRAIN_SEED, epochs=20)


@pytest.fixture(scope="session")
def scene_corpus() -> list[tuple[SceneSpec, np.ndarray]]:
    return [(spec, render_scene(spec)) for spec in (generate_scene(seed) for seed in range(50))]


def make_reading(text: str, confidence: float = 0.93) -> PlateReading:
    def dist(ch: str) -> list[float]:
        rest = (1.0 - confidence) / 35
        return [confidence if c == ch else rest for c in "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"]

    return reading_from_dict(
        {
            "text": text,
            "plate_confidence": confidence,
            "chars": [
                {"box": [4.0 + 22.0 * i, 10.0, 22.0 + 22.0 * i, 60.0], "dist": dist(ch)}
                for i, ch in enumerate(text)
            ],
            "adapted": [False] * len(text),
        }
    )


def make_record(
    image_id: str,
    plate_text: str | None,
    category: VehicleCategory = VehicleCategory.FOUR_WHEELER,
    score: float = 0.9,
    offset: float = 0.0,
    ingested_at: str = "2026-01-05T10:00:00Z",
) -> VehicleRecord:
    box = BoundingBox(10.0 + offset, 20.0 + offset, 250.0 + offset, 180.0 + offset)
    quad = None
    reading = None
    if plate_text is not None:
        quad = Quadrilateral(
            (
                (60.0 + offset, 120.0 + offset),
                (200.0 + offset, 122.0 + offset),
                (199.0 + offset, 160.0 + offset),
                (59.0 + offset, 158.0 + offset),
            )
        )
        reading = make_reading(plate_text)
    return VehicleRecord(
        record_id=make_record_id(image_id, box, category),
        image_id=image_id,
        source_path=f"/data/{image_id}",
        ingested_at=ingested_at,
        category=category,
        box=box,
        detection_score=score,
        plate_quad=quad,
        plate_reading=reading,
        crop_refs={},
    )

"""Staged plate reading: binarize, find the text line, segment, classify.

The reader is a transparent analogue of a classic staged OCR engine: global
Otsu binarization with polarity normalization, connected-component character
blobs grouped into a single text line, a 36-class glyph classifier, and a
plate-scoped adaptive second pass that re-scores low-confidence characters
against the plate's own confident glyphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import EmptyPlate, ModelFailure, NoCharactersFound
from .localization import RectifiedPlate
from .model import PLATE_ALPHABET, BoundingBox

GLYPH_INPUT_SIZE = 32

# Component filters for single-line Latin plates, relative to plate height.
MIN_CHAR_HEIGHT_FRAC = 0.3
MAX_CHAR_HEIGHT_FRAC = 0.95
MIN_CHAR_ASPECT = 0.8  # h / w
MAX_CHAR_ASPECT = 8.0

DEFAULT_ADAPT_THRESHOLD = 0.6
DEFAULT_ADAPT_MARGIN = 0.1

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Luminance conversion to float64 in [0, 255]."""
    arr = np.asarray(image)
    if arr.ndim == 3:
        arr = 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]
    arr = arr.astype(np.float64)
    if arr.size and arr.max() <= 1.0:
        arr = arr * 255.0
    return arr


def _otsu_threshold(levels: np.ndarray) -> int | None:
    """Otsu's threshold over uint8 levels; None when there is no second mode."""
    hist = np.bincount(levels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if np.count_nonzero(hist) < 2:
        return None
    omega = np.cumsum(hist) / total
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_total = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = (mu_total * omega - mu) ** 2 / (omega * (1.0 - omega))
    sigma_b[~np.isfinite(sigma_b)] = -1.0
    return int(np.argmax(sigma_b))


def binarize(plate: np.ndarray) -> np.ndarray:
    """Otsu-binarize a plate so glyphs come out as foreground (True).

    Polarity is normalized by taking the minority pixel class as foreground:
    glyphs cover well under half the plate in either polarity. A uniform
    image yields an all-background result.
    """
    gray = to_grayscale(plate)
    if gray.size == 0:
        return np.zeros_like(gray, dtype=bool)
    levels = np.clip(np.round(gray), 0, 255).astype(np.uint8)
    threshold = _otsu_threshold(levels)
    if threshold is None:
        return np.zeros(gray.shape, dtype=bool)
    dark = levels <= threshold
    n_dark = int(np.count_nonzero(dark))
    # ties go to dark-as-foreground: plate text is usually dark on light
    return dark if n_dark <= dark.size - n_dark else ~dark


@dataclass(frozen=True)
class CharBox:
    box: BoundingBox
    order_index: int


def segment_characters(binary: np.ndarray) -> list[CharBox]:
    """Split a binarized plate into ordered character boxes.

    Connected components are grouped into the text line (largest cluster of
    vertical centers within half the median component height of each other),
    then filtered by height and aspect; survivors are indexed left to right.
    Raises NoCharactersFound when nothing survives.
    """
    binary = np.asarray(binary, dtype=bool)
    labels, count = ndimage.label(binary, structure=_EIGHT_CONNECTED)
    if count == 0:
        raise NoCharactersFound("no foreground components in plate")
    slices = ndimage.find_objects(labels)
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    comps = []  # (cy, area, x0, y0, x1, y1)
    for idx, sl in enumerate(slices, start=1):
        if sl is None:
            continue
        y0, y1 = sl[0].start, sl[0].stop
        x0, x1 = sl[1].start, sl[1].stop
        comps.append(((y0 + y1) / 2.0, int(areas[idx]), x0, y0, x1, y1))
    heights = np.array([c[5] - c[3] for c in comps], dtype=np.float64)
    line_tolerance = float(np.median(heights)) / 2.0

    # text line = the heaviest (total foreground area) window over cy-sorted
    # components whose center spread stays within the tolerance
    comps.sort(key=lambda c: c[0])
    centers = [c[0] for c in comps]
    best_start, best_end, best_mass = 0, 1, -1
    lo = 0
    mass = 0
    for hi in range(len(comps)):
        mass += comps[hi][1]
        while centers[hi] - centers[lo] > line_tolerance:
            mass -= comps[lo][1]
            lo += 1
        if mass > best_mass:
            best_start, best_end, best_mass = lo, hi + 1, mass
    line = comps[best_start:best_end]

    plate_h = binary.shape[0]
    survivors = []
    for _, _, x0, y0, x1, y1 in line:
        h = y1 - y0
        w = x1 - x0
        if not (MIN_CHAR_HEIGHT_FRAC * plate_h <= h <= MAX_CHAR_HEIGHT_FRAC * plate_h):
            continue
        aspect = h / w if w > 0 else math.inf
        if not (MIN_CHAR_ASPECT <= aspect <= MAX_CHAR_ASPECT):
            continue
        survivors.append((x0, y0, x1, y1))
    if not survivors:
        raise NoCharactersFound("all components filtered out")
    survivors.sort(key=lambda b: (b[0], b[2], b[1]))
    return [
        CharBox(box=BoundingBox(float(x0), float(y0), float(x1), float(y1)), order_index=i)
        for i, (x0, y0, x1, y1) in enumerate(survivors)
    ]


@dataclass(frozen=True)
class CharPrediction:
    """Top-1 plus the full ranked 36-class distribution."""

    char: str
    confidence: float
    alternates: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if len(self.alternates) != len(PLATE_ALPHABET):
            raise ValueError("alternates must rank all 36 classes")
        total = sum(c for _, c in self.alternates)
        if abs(total - 1.0) > 1e-6 or any(c < -1e-12 for _, c in self.alternates):
            raise ValueError(f"alternates must be a probability distribution (sum {total})")
        confs = [c for _, c in self.alternates]
        if any(confs[i] < confs[i + 1] - 1e-12 for i in range(len(confs) - 1)):
            raise ValueError("alternates must be ranked by descending confidence")
        head = self.alternates[0]
        if head != (self.char, self.confidence):
            raise ValueError("head of alternates must equal (char, confidence)")


@dataclass(frozen=True)
class PlateReading:
    text: str
    chars: tuple[tuple[CharBox, CharPrediction], ...]
    plate_confidence: float
    adapted: tuple[bool, ...]

    def __post_init__(self):
        expected = "".join(pred.char for _, pred in self.chars)
        if self.text != expected:
            raise ValueError(f"text {self.text!r} != concatenated predictions {expected!r}")
        if len(self.adapted) != len(self.chars):
            raise ValueError("adapted flags must align with chars")


class CharClassifier(Protocol):
    """Fixed-size grayscale glyph in, full 36-class distribution out."""

    input_size: int
    labels: str

    def predict_proba(self, glyphs: np.ndarray) -> np.ndarray:
        ...


def letterbox_glyph(crop: np.ndarray, size: int = GLYPH_INPUT_SIZE) -> np.ndarray:
    """Aspect-preserving resize onto a size x size black canvas, centered."""
    crop = np.asarray(crop, dtype=np.float32)
    if crop.ndim != 2 or crop.size == 0:
        raise ValueError(f"glyph crop must be a non-empty 2D raster, got {crop.shape}")
    h, w = crop.shape
    scale = size / max(h, w)
    nh = max(1, int(round(h * scale)))
    nw = max(1, int(round(w * scale)))
    resized = np.asarray(
        Image.fromarray(crop, mode="F").resize((nw, nh), Image.BILINEAR), dtype=np.float32
    )
    canvas = np.zeros((size, size), dtype=np.float32)
    y0 = (size - nh) // 2
    x0 = (size - nw) // 2
    canvas[y0 : y0 + nh, x0 : x0 + nw] = resized
    return canvas


def _distribution_to_prediction(dist: np.ndarray, labels: str) -> CharPrediction:
    order = np.argsort(-dist, kind="stable")
    alternates = tuple((labels[i], float(dist[i])) for i in order)
    return CharPrediction(char=alternates[0][0], confidence=alternates[0][1], alternates=alternates)


def classify_character(glyph: np.ndarray, model: CharClassifier) -> CharPrediction:
    """Letterbox a glyph crop to the model input size and classify it."""
    glyph = np.asarray(glyph, dtype=np.float32)
    if glyph.max() > 1.0:
        glyph = glyph / 255.0
    boxed = letterbox_glyph(glyph, getattr(model, "input_size", GLYPH_INPUT_SIZE))
    try:
        dist = np.asarray(model.predict_proba(boxed[None, :, :]), dtype=np.float64)[0]
    except Exception as exc:
        raise ModelFailure(f"classifier raised: {exc}") from exc
    if dist.shape != (len(PLATE_ALPHABET),) or np.any(dist < -1e-12) or abs(dist.sum() - 1.0) > 1e-6:
        raise ModelFailure(f"classifier output is not a 36-class distribution: {dist!r}")
    labels = getattr(model, "labels", PLATE_ALPHABET)
    return _distribution_to_prediction(dist, labels)


def _normalize_template(raster: np.ndarray) -> np.ndarray | None:
    flat = raster.astype(np.float64).ravel()
    flat = flat - flat.mean()
    norm = np.linalg.norm(flat)
    if norm < 1e-9:
        return None
    return flat / norm


def _swap_distribution(pred: CharPrediction, new_char: str) -> CharPrediction:
    """Revised prediction: swap probability mass between old top and new char."""
    probs = {ch: c for ch, c in pred.alternates}
    probs[pred.char], probs[new_char] = probs[new_char], probs[pred.char]
    dist = np.array([probs[ch] for ch in PLATE_ALPHABET])
    return _distribution_to_prediction(dist, PLATE_ALPHABET)


def extract_glyph(binary: np.ndarray, box: BoundingBox, pad: int = 1) -> np.ndarray:
    """Glyph crop (float 0/1) from a binarized plate with a background margin."""
    x0, y0, x1, y1 = box.pixel_extent()
    h, w = binary.shape
    x0, y0 = max(x0 - pad, 0), max(y0 - pad, 0)
    x1, y1 = min(x1 + pad, w), min(y1 + pad, h)
    return binary[y0:y1, x0:x1].astype(np.float32)


def read_plate(
    plate: RectifiedPlate | np.ndarray,
    model: CharClassifier,
    adapt_threshold: float = DEFAULT_ADAPT_THRESHOLD,
    adapt_margin: float = DEFAULT_ADAPT_MARGIN,
) -> PlateReading:
    """Full staged read of a rectified plate.

    First pass classifies every segmented glyph. The adaptive second pass
    re-scores characters below adapt_threshold by normalized-correlation
    votes against class templates built from this plate's confident
    characters; a character is revised (and flagged) only when the vote
    disagrees and wins by more than adapt_margin over the runner-up
    template.
    """
    if not (0.0 <= adapt_threshold <= 1.0):
        raise ValueError(f"adapt_threshold must be in [0, 1], got {adapt_threshold}")
    raster = plate.image if isinstance(plate, RectifiedPlate) else plate
    binary = binarize(raster)
    char_boxes = segment_characters(binary)

    glyphs: list[np.ndarray] = []
    predictions: list[CharPrediction] = []
    for cb in char_boxes:
        crop = extract_glyph(binary, cb.box)
        if crop.size == 0:
            continue
        boxed = letterbox_glyph(crop, getattr(model, "input_size", GLYPH_INPUT_SIZE))
        glyphs.append(boxed)
        predictions.append(classify_character(crop, model))
    if not predictions:
        raise EmptyPlate("every segmented glyph was empty")
    char_boxes = char_boxes[: len(predictions)]

    adapted = [False] * len(predictions)
    low = [i for i, p in enumerate(predictions) if p.confidence < adapt_threshold]
    confident = [i for i, p in enumerate(predictions) if p.confidence >= adapt_threshold]
    if low and confident:
        by_class: dict[str, list[np.ndarray]] = {}
        for i in confident:
            by_class.setdefault(predictions[i].char, []).append(glyphs[i])
        templates = {}
        for ch, rasters in by_class.items():
            t = _normalize_template(np.mean(rasters, axis=0))
            if t is not None:
                templates[ch] = t
        if templates:
            for i in low:
                g = _normalize_template(glyphs[i])
                if g is None:
                    continue
                sims = sorted(
                    ((float(t @ g), ch) for ch, t in templates.items()), reverse=True
                )
                best_sim, best_char = sims[0]
                runner_up = sims[1][0] if len(sims) > 1 else 0.0
                if best_char != predictions[i].char and best_sim - runner_up > adapt_margin:
                    predictions[i] = _swap_distribution(predictions[i], best_char)
                    adapted[i] = True

    confidences = np.array([p.confidence for p in predictions], dtype=np.float64)
    plate_confidence = float(np.exp(np.mean(np.log(np.clip(confidences, 1e-12, None)))))
    return PlateReading(
        text="".join(p.char for p in predictions),
        chars=tuple(zip(char_boxes, predictions)),
        plate_confidence=plate_confidence,
        adapted=tuple(adapted),
    )


def reading_to_dict(reading: PlateReading) -> dict:
    """JSON-ready form used by the record store.

    The full 36-way distribution is kept per character (in label order) so a
    reloaded reading compares equal to the live one.
    """
    by_label = []
    for _, pred in reading.chars:
        probs = dict(pred.alternates)
        by_label.append([probs[ch] for ch in PLATE_ALPHABET])
    return {
        "text": reading.text,
        "plate_confidence": reading.plate_confidence,
        "chars": [
            {
                "box": [cb.box.x_min, cb.box.y_min, cb.box.x_max, cb.box.y_max],
                "dist": dist,
            }
            for (cb, _), dist in zip(reading.chars, by_label)
        ],
        "adapted": list(reading.adapted),
    }


def reading_from_dict(doc: dict) -> PlateReading:
    """Rebuild a PlateReading persisted by reading_to_dict."""
    chars = []
    for i, entry in enumerate(doc.get("chars", [])):
        x0, y0, x1, y1 = entry["box"]
        cb = CharBox(box=BoundingBox(x0, y0, x1, y1), order_index=i)
        dist = np.asarray(entry["dist"], dtype=np.float64)
        chars.append((cb, _distribution_to_prediction(dist, PLATE_ALPHABET)))
    return PlateReading(
        text=str(doc["text"]),
        chars=tuple(chars),
        plate_confidence=float(doc.get("plate_confidence", 0.0)),
        adapted=tuple(bool(x) for x in doc.get("adapted", [False] * len(chars))),
    )

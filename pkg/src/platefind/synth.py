"""Synthetic plate rendering: deterministic ground-truthed training data.

Stands in for a real character corpus: renders random plate strings in a
vendored monospaced font with configurable perspective jitter, blur, and
noise, and emits full ground truth (text, per-glyph boxes and masks) so
tests and training never need hand labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy import ndimage

from .localization import warp_plate, fit_rectifying_homography
from .model import PLATE_ALPHABET, BoundingBox, Quadrilateral
from .ocr import GLYPH_INPUT_SIZE, binarize, extract_glyph, letterbox_glyph

FONT_RESOURCE = "DejaVuSansMono-Bold.ttf"


def bundled_font_path() -> Path:
    return Path(str(resources.files("platefind") / "data" / "fonts" / FONT_RESOURCE))


@dataclass(frozen=True)
class PlateSynthSpec:
    """Knobs for the plate renderer; the default is mildly degraded."""

    width: int = 240
    height: int = 80
    min_len: int = 6
    max_len: int = 10
    jitter_px: float = 2.0
    blur_sigma: float = 0.5
    noise_sigma: float = 6.0
    invert_prob: float = 0.0
    char_sampling: str = "uniform"  # or "balanced"
    background: int = 245
    foreground: int = 15
    font_frac: float = 0.62
    tracking: float = 1.12  # letter-spacing multiplier; keeps glyphs separable

    @classmethod
    def zero_noise(cls, **overrides) -> "PlateSynthSpec":
        return cls(jitter_px=0.0, blur_sigma=0.0, noise_sigma=0.0, **overrides)

    def with_(self, **overrides) -> "PlateSynthSpec":
        return replace(self, **overrides)


@dataclass
class SynthPlate:
    image: np.ndarray  # (H, W) uint8
    text: str
    glyph_boxes: list[BoundingBox]
    glyph_masks: list[np.ndarray]  # full-extent bool, one per glyph
    warp_quad: Quadrilateral | None = None

    @property
    def combined_mask(self) -> np.ndarray:
        out = np.zeros(self.image.shape, dtype=bool)
        for m in self.glyph_masks:
            out |= m
        return out


_glyph_cache: dict[tuple[int, str], tuple[np.ndarray, int, int]] = {}


def _glyph_alpha(font: ImageFont.FreeTypeFont, size: int, char: str):
    """Tight antialiased alpha raster for one glyph plus its draw offset."""
    key = (size, char)
    cached = _glyph_cache.get(key)
    if cached is not None:
        return cached
    pad = size
    canvas = Image.new("L", (2 * pad, 2 * pad), 0)
    ImageDraw.Draw(canvas).text((pad // 2, pad // 2), char, font=font, fill=255)
    arr = np.asarray(canvas)
    ys, xs = np.nonzero(arr)
    if len(ys) == 0:
        alpha, dx, dy = np.zeros((1, 1), dtype=np.uint8), 0, 0
    else:
        alpha = arr[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
        dx, dy = int(xs.min() - pad // 2), int(ys.min() - pad // 2)
    _glyph_cache[key] = (alpha, dx, dy)
    return alpha, dx, dy


class _CharSampler:
    def __init__(self, mode: str, rng: np.random.Generator):
        if mode not in ("uniform", "balanced"):
            raise ValueError(f"unknown char_sampling mode {mode!r}")
        self._mode = mode
        self._rng = rng
        self._deck: list[str] = []

    def draw(self, n: int) -> str:
        if self._mode == "uniform":
            idx = self._rng.integers(0, len(PLATE_ALPHABET), size=n)
            return "".join(PLATE_ALPHABET[i] for i in idx)
        chars = []
        while len(chars) < n:
            if not self._deck:
                self._deck = list(PLATE_ALPHABET)
                self._rng.shuffle(self._deck)
            chars.append(self._deck.pop())
        return "".join(chars)


def _render_flat(text: str, spec: PlateSynthSpec):
    w, h = spec.width, spec.height
    size = int(h * spec.font_frac)
    font = ImageFont.truetype(str(bundled_font_path()), size)
    advance = font.getlength("0") * spec.tracking
    usable = w - 16
    if len(text) * advance > usable:
        size = max(10, int(size * usable / (len(text) * advance)))
        font = ImageFont.truetype(str(bundled_font_path()), size)
        advance = font.getlength("0") * spec.tracking

    ref = font.getbbox("0")
    draw_y = int(round((h - (ref[3] - ref[1])) / 2 - ref[1]))
    start_x = int(round((w - len(text) * advance) / 2))

    canvas = np.full((h, w), float(spec.background))
    boxes: list[BoundingBox] = []
    masks: list[np.ndarray] = []
    for i, ch in enumerate(text):
        x = int(round(start_x + i * advance))
        alpha, dx, dy = _glyph_alpha(font, size, ch)
        gy, gx = alpha.shape
        y0, x0 = draw_y + dy, x + dx
        y1, x1 = min(y0 + gy, h), min(x0 + gx, w)
        y0c, x0c = max(y0, 0), max(x0, 0)
        sub = alpha[y0c - y0 : y1 - y0, x0c - x0 : x1 - x0].astype(np.float64) / 255.0
        region = canvas[y0c:y1, x0c:x1]
        canvas[y0c:y1, x0c:x1] = region * (1.0 - sub) + float(spec.foreground) * sub
        mask = np.zeros((h, w), dtype=bool)
        mask[y0c:y1, x0c:x1] = sub > 0.5
        ys, xs = np.nonzero(mask)
        boxes.append(
            BoundingBox(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))
        )
        masks.append(mask)
    return canvas, boxes, masks


def _apply_jitter(canvas, boxes, masks, spec: PlateSynthSpec, rng: np.random.Generator):
    """Mild inward perspective: simulates imperfect upstream rectification."""
    w, h = spec.width, spec.height
    j = spec.jitter_px
    pulls = rng.uniform(0.0, j, size=8)
    quad = Quadrilateral(
        (
            (pulls[0], pulls[1]),
            (w - pulls[2], pulls[3]),
            (w - pulls[4], h - pulls[5]),
            (pulls[6], h - pulls[7]),
        )
    )
    warped = warp_plate(np.clip(np.round(canvas), 0, 255).astype(np.uint8), quad, w, h)
    hmat = fit_rectifying_homography(quad, w, h)
    new_boxes = []
    new_masks = []
    for box, mask in zip(boxes, masks):
        corners = np.array(
            [
                (box.x_min, box.y_min),
                (box.x_max, box.y_min),
                (box.x_max, box.y_max),
                (box.x_min, box.y_max),
            ]
        )
        mapped = hmat.apply(corners)
        x0 = max(float(mapped[:, 0].min()), 0.0)
        y0 = max(float(mapped[:, 1].min()), 0.0)
        x1 = min(float(mapped[:, 0].max()), float(w))
        y1 = min(float(mapped[:, 1].max()), float(h))
        new_boxes.append(BoundingBox(x0, y0, max(x1, x0 + 1.0), max(y1, y0 + 1.0)))
        warped_mask = warp_plate(mask.astype(np.float64), quad, w, h)
        new_masks.append(warped_mask.image > 0.5)
    return warped.image.astype(np.float64), new_boxes, new_masks, quad


def _synthesize(text: str, spec: PlateSynthSpec, rng: np.random.Generator) -> SynthPlate:
    canvas, boxes, masks = _render_flat(text, spec)
    quad = None
    if spec.jitter_px > 0:
        canvas, boxes, masks, quad = _apply_jitter(canvas, boxes, masks, spec, rng)
    if spec.blur_sigma > 0:
        canvas = ndimage.gaussian_filter(canvas, spec.blur_sigma)
    if spec.noise_sigma > 0:
        canvas = canvas + rng.normal(0.0, spec.noise_sigma, size=canvas.shape)
    if spec.invert_prob > 0 and rng.random() < spec.invert_prob:
        canvas = 255.0 - canvas
    image = np.clip(np.round(canvas), 0, 255).astype(np.uint8)
    return SynthPlate(image=image, text=text, glyph_boxes=boxes, glyph_masks=masks, warp_quad=quad)


def iter_synthetic_plates(
    count: int, seed: int, spec: PlateSynthSpec | None = None
) -> Iterator[SynthPlate]:
    """Stream `count` deterministic plates for the given seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    spec = spec or PlateSynthSpec()
    rng = np.random.default_rng(seed)
    sampler = _CharSampler(spec.char_sampling, rng)
    for _ in range(count):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        yield _synthesize(sampler.draw(length), spec, rng)


def generate_synthetic_plates(
    count: int, seed: int, spec: PlateSynthSpec | None = None
) -> list[SynthPlate]:
    return list(iter_synthetic_plates(count, seed, spec))


def render_plate(text: str, spec: PlateSynthSpec | None = None, seed: int = 0) -> SynthPlate:
    """Render one plate with a fixed text through the same degradation chain."""
    return _synthesize(text, spec or PlateSynthSpec(), np.random.default_rng(seed))


def build_glyph_dataset(
    num_plates: int, seed: int, spec: PlateSynthSpec | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Letterboxed glyph crops + integer labels, preprocessed like read_plate.

    Crops come from the recorded ground-truth boxes of rendered plates, so
    labels are always aligned; binarization and letterboxing match the
    inference path exactly.
    """
    xs: list[np.ndarray] = []
    ys: list[int] = []
    for plate in iter_synthetic_plates(num_plates, seed, spec):
        binary = binarize(plate.image)
        for ch, box in zip(plate.text, plate.glyph_boxes):
            crop = extract_glyph(binary, box)
            if crop.size == 0 or np.count_nonzero(crop) < 3:
                continue
            xs.append(letterbox_glyph(crop, GLYPH_INPUT_SIZE))
            ys.append(PLATE_ALPHABET.index(ch))
    return np.stack(xs).astype(np.float32), np.asarray(ys, dtype=np.int64)


def write_manifest(plates: list[SynthPlate], out_dir: str | Path) -> Path:
    """Save plates as PNGs plus a JSON-lines manifest; returns manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for i, plate in enumerate(plates):
            name = f"plate_{i:05d}.png"
            Image.fromarray(plate.image).save(out / name)
            fh.write(
                json.dumps(
                    {
                        "file": name,
                        "text": plate.text,
                        "glyph_boxes": [list(b.as_tuple()) for b in plate.glyph_boxes],
                    }
                )
                + "\n"
            )
    return manifest

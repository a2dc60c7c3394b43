"""Reference backends: a tiny learned vehicle detector and a heuristic
plate-map producer.

These exist to exercise the pluggable backend contracts end to end without
any external model weights. The vehicle detector proposes colorful blobs and
classifies 32x32 crops with a small MLP trained on synthetic scenes; the
plate backend looks for bright wide rectangles inside a vehicle crop. They
are desk-scale stand-ins, not production detectors.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .classifier import _softmax, train_mlp
from .detection import VehicleDetection
from .localization import DEFAULT_BASE_SIDE, DEFAULT_STRIDE, DetectionMap
from .model import BoundingBox, VehicleCategory
from .ocr import binarize
from .scenes import SceneSpec, render_scene

_CATEGORIES = list(VehicleCategory)
_CROP_SIZE = 32
_MIN_BLOB_AREA = 900
_COLORFULNESS_THRESHOLD = 40
_DET_ARCH = "blob-mlp-v1"


def _crop_features(image: np.ndarray, box: BoundingBox) -> np.ndarray:
    x0, y0, x1, y1 = box.pixel_extent()
    crop = image[y0:y1, x0:x1]
    resized = np.asarray(
        Image.fromarray(crop).resize((_CROP_SIZE, _CROP_SIZE), Image.BILINEAR),
        dtype=np.float64,
    )
    return (resized / 255.0).ravel()


def _propose_blobs(image: np.ndarray) -> list[BoundingBox]:
    rgb = image.astype(np.int16)
    colorfulness = rgb.max(axis=2) - rgb.min(axis=2)
    mask = colorfulness > _COLORFULNESS_THRESHOLD
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    boxes = []
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        if h * w < _MIN_BLOB_AREA:
            continue
        boxes.append(
            BoundingBox(float(sl[1].start), float(sl[0].start), float(sl[1].stop), float(sl[0].stop))
        )
    return boxes


class ReferenceBlobDetector:
    """Colorful-blob proposals + learned category head.

    Deterministic for fixed weights; safe for concurrent use (read-only).
    """

    concurrent_safe = True

    def __init__(self, w1, b1, w2, b2):
        self.name = "reference-blob"
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)

    def _classify(self, features: np.ndarray) -> np.ndarray:
        hidden = np.maximum(features @ self.w1 + self.b1, 0.0)
        return _softmax(hidden @ self.w2 + self.b2)

    def detect(self, image: np.ndarray) -> list[VehicleDetection]:
        detections = []
        for box in _propose_blobs(image):
            probs = self._classify(_crop_features(image, box)[None, :])[0]
            idx = int(np.argmax(probs))
            detections.append(
                VehicleDetection(
                    category=_CATEGORIES[idx], box=box, score=float(probs[idx])
                )
            )
        return detections

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            np.savez(
                fh,
                arch=np.array(_DET_ARCH),
                w1=self.w1,
                b1=self.b1,
                w2=self.w2,
                b2=self.b2,
            )

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceBlobDetector":
        with np.load(path, allow_pickle=False) as data:
            if str(data["arch"]) != _DET_ARCH:
                raise ValueError(f"unsupported detector architecture {data['arch']!r}")
            return cls(data["w1"], data["b1"], data["w2"], data["b2"])


def train_reference_detector(
    scenes: Sequence[SceneSpec], seed: int = 0, epochs: int = 20, hidden: int = 64
) -> ReferenceBlobDetector:
    """Fit the category head on ground-truth crops of rendered scenes."""
    features = []
    labels = []
    for spec in scenes:
        image = render_scene(spec)
        for obj in spec.objects:
            features.append(_crop_features(image, obj.box))
            labels.append(_CATEGORIES.index(obj.category))
    weights = train_mlp(
        np.stack(features),
        np.asarray(labels),
        n_out=len(_CATEGORIES),
        seed=seed,
        hidden=hidden,
        epochs=epochs,
        batch_size=32,
    )
    return ReferenceBlobDetector(*weights)


class BrightRectPlateBackend:
    """Heuristic plate-map producer: bright, wide, plate-sized blobs.

    Binarizes the crop, looks for bright components with plate-like aspect
    and size, and emits one confident cell per candidate with the affine of
    its bounding rectangle. Deterministic; needs no training.
    """

    concurrent_safe = True

    def __init__(self, stride: float = DEFAULT_STRIDE, base_side: float = DEFAULT_BASE_SIDE):
        self.name = "bright-rect"
        self.stride = stride
        self.base_side = base_side

    def map_for(self, crop: np.ndarray, origin: tuple[float, float] = (0.0, 0.0)) -> DetectionMap:
        h, w = crop.shape[:2]
        h_c = max(1, int(math.ceil(h / self.stride)))
        w_c = max(1, int(math.ceil(w / self.stride)))
        probs = np.zeros((h_c, w_c))
        affine = np.zeros((h_c, w_c, 6))

        gray = crop.astype(np.float64)
        if gray.ndim == 3:
            gray = gray.mean(axis=2)
        foreground = binarize(crop)
        # binarize promises glyph-side foreground; we want the bright side
        bright = foreground if gray[foreground].mean() > gray[~foreground].mean() else ~foreground
        labels, count = ndimage.label(bright, structure=np.ones((3, 3), dtype=int))
        if count == 0:
            return DetectionMap(probs, affine, stride=self.stride, base_side=self.base_side)
        for sl in ndimage.find_objects(labels):
            if sl is None:
                continue
            bh = sl[0].stop - sl[0].start
            bw = sl[1].stop - sl[1].start
            if bh < 10 or bw < 30 or bw > 0.95 * w:
                continue
            aspect = bw / bh
            if not (1.8 <= aspect <= 6.0):
                continue
            cx = (sl[1].start + sl[1].stop) / 2.0
            cy = (sl[0].start + sl[0].stop) / 2.0
            # decoder anchors quads at cell centers: use the nearest cell and
            # widen just enough that the sub-stride offset cannot clip the blob
            col = min(max(int(round(cx / self.stride - 0.5)), 0), w_c - 1)
            row = min(max(int(round(cy / self.stride - 0.5)), 0), h_c - 1)
            dx = abs(cx - (col + 0.5) * self.stride)
            dy = abs(cy - (row + 0.5) * self.stride)
            a11 = (bw + 2.0 * dx + 2.0) / self.base_side
            a22 = (bh + 2.0 * dy + 2.0) / self.base_side
            fill = np.count_nonzero(
                bright[sl[0].start : sl[0].stop, sl[1].start : sl[1].stop]
            ) / (bh * bw)
            probs[row, col] = max(probs[row, col], min(0.5 + 0.5 * fill, 0.99))
            affine[row, col] = (a11, 0.0, 0.0, 0.0, a22, 0.0)
        return DetectionMap(probs, affine, stride=self.stride, base_side=self.base_side)

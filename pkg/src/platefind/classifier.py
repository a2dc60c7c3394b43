"""Glyph classifier: a small MLP trained on synthetic letterboxed glyphs.

Kept dependency-light on purpose: training is a few matmuls, deterministic
for a fixed seed, and serializes to a single file holding the architecture
descriptor, the weights, and the class label order.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .errors import InsufficientData
from .model import PLATE_ALPHABET
from .ocr import GLYPH_INPUT_SIZE

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_CLASS = 10
_ARCH = "mlp-relu-v1"


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class MLPCharClassifier:
    """1024 -> hidden ReLU -> 36 softmax over letterboxed 32x32 glyphs."""

    input_size = GLYPH_INPUT_SIZE
    labels = PLATE_ALPHABET
    concurrent_safe = True

    def __init__(self, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)

    def predict_proba(self, glyphs: np.ndarray) -> np.ndarray:
        x = np.asarray(glyphs, dtype=np.float64).reshape(len(glyphs), -1)
        hidden = np.maximum(x @ self.w1 + self.b1, 0.0)
        return _softmax(hidden @ self.w2 + self.b2)

    def predict(self, glyphs: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(glyphs), axis=1)

    def save(self, path: str | Path) -> None:
        """Single-file artifact: architecture + weights + label order."""
        with open(path, "wb") as fh:
            np.savez(
                fh,
                arch=np.array(_ARCH),
                labels=np.array(self.labels),
                input_size=np.array(self.input_size),
                w1=self.w1,
                b1=self.b1,
                w2=self.w2,
                b2=self.b2,
            )

    @classmethod
    def load(cls, path: str | Path) -> "MLPCharClassifier":
        with np.load(path, allow_pickle=False) as data:
            arch = str(data["arch"])
            labels = str(data["labels"])
            if arch != _ARCH:
                raise ValueError(f"unsupported model architecture {arch!r}")
            if labels != PLATE_ALPHABET:
                raise ValueError(f"model label order {labels!r} does not match {PLATE_ALPHABET!r}")
            return cls(data["w1"], data["b1"], data["w2"], data["b2"])


def train_mlp(
    x: np.ndarray,
    y: np.ndarray,
    n_out: int,
    seed: int = 0,
    hidden: int = 256,
    epochs: int = 25,
    batch_size: int = 128,
    learning_rate: float = 1e-3,
    weight_decay: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Adam-trained two-layer MLP; returns (w1, b1, w2, b2).

    Deterministic for a fixed seed.
    """
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(seed)
    n_in = x.shape[1]
    w1 = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, n_out))
    b2 = np.zeros(n_out)

    params = [w1, b1, w2, b2]
    moments = [np.zeros_like(p) for p in params]
    velocities = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    n = len(x)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x[idx], y[idx]
            pre = xb @ w1 + b1
            hid = np.maximum(pre, 0.0)
            probs = _softmax(hid @ w2 + b2)
            total_loss -= float(np.log(probs[np.arange(len(yb)), yb] + 1e-12).sum())

            grad_logits = probs
            grad_logits[np.arange(len(yb)), yb] -= 1.0
            grad_logits /= len(yb)
            g_w2 = hid.T @ grad_logits + weight_decay * w2
            g_b2 = grad_logits.sum(axis=0)
            grad_hid = grad_logits @ w2.T
            grad_hid[pre <= 0.0] = 0.0
            g_w1 = xb.T @ grad_hid + weight_decay * w1
            g_b1 = grad_hid.sum(axis=0)

            step += 1
            for p, m, v, g in zip(params, moments, velocities, (g_w1, g_b1, g_w2, g_b2)):
                m *= beta1
                m += (1 - beta1) * g
                v *= beta2
                v += (1 - beta2) * g * g
                m_hat = m / (1 - beta1**step)
                v_hat = v / (1 - beta2**step)
                p -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        logger.debug("epoch %d/%d loss %.4f", epoch + 1, epochs, total_loss / n)

    return w1, b1, w2, b2


def train_char_classifier(
    glyphs: np.ndarray,
    labels: np.ndarray,
    seed: int = 0,
    hidden: int = 256,
    epochs: int = 25,
    batch_size: int = 128,
    learning_rate: float = 1e-3,
    weight_decay: float = 1e-4,
) -> MLPCharClassifier:
    """Train the glyph MLP on (N, 32, 32) letterboxed glyphs + integer labels.

    Raises InsufficientData when any of the 36 classes has fewer than 10
    samples.
    """
    y = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(y, minlength=len(PLATE_ALPHABET))
    lacking = [PLATE_ALPHABET[i] for i, c in enumerate(counts) if c < MIN_SAMPLES_PER_CLASS]
    if lacking:
        raise InsufficientData(
            f"classes with fewer than {MIN_SAMPLES_PER_CLASS} samples: {', '.join(lacking)}"
        )
    weights = train_mlp(
        glyphs,
        y,
        n_out=len(PLATE_ALPHABET),
        seed=seed,
        hidden=hidden,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        weight_decay=weight_decay,
    )
    return MLPCharClassifier(*weights)

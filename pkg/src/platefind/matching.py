"""Query matching: confusion-aware plate distance and search verdicts.

The plate comparison is a weighted Levenshtein distance: insert/delete cost
1, substitution cost taken from a symmetric confusion table (default 1 for
unlisted pairs). OCR confusables like M/N get a cheap substitution so an
operator can widen the fuzz budget instead of guessing the exact read.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import kernels
from .errors import InvalidConfusionTable
from .model import PLATE_ALPHABET, VehicleCategory

INDEL_COST = 1.0

# Only M/N is anchored in observed confusions; the rest are stock OCR
# look-alikes, shipped as editable configuration (data/default_confusions.json).
DEFAULT_CONFUSION_PAIRS: tuple[tuple[str, str, float], ...] = (
    ("M", "N", 0.25),
    ("0", "O", 0.25),
    ("1", "I", 0.25),
    ("8", "B", 0.25),
    ("5", "S", 0.25),
)

_CODE_BY_CHAR = {ch: i for i, ch in enumerate(PLATE_ALPHABET)}


def encode_plate(text: str) -> np.ndarray:
    return np.fromiter((_CODE_BY_CHAR[ch] for ch in text), dtype=np.uint8, count=len(text))


class ConfusionTable:
    """Symmetric substitution costs over the 36-character plate alphabet."""

    def __init__(self, pairs: Iterable[tuple[str, str, float]] = DEFAULT_CONFUSION_PAIRS):
        matrix = np.ones((len(PLATE_ALPHABET), len(PLATE_ALPHABET)), dtype=np.float64)
        np.fill_diagonal(matrix, 0.0)
        listed: dict[tuple[str, str], float] = {}
        for a, b, cost in pairs:
            a, b = str(a).upper(), str(b).upper()
            if a not in _CODE_BY_CHAR or b not in _CODE_BY_CHAR:
                raise InvalidConfusionTable(f"characters must be in [0-9A-Z]: {a!r}, {b!r}")
            if a == b:
                raise InvalidConfusionTable(f"self-pair {a!r} not allowed (cost(a,a) is 0)")
            if not (0.0 < cost <= 1.0):
                raise InvalidConfusionTable(f"cost for ({a},{b}) must be in (0,1], got {cost}")
            key = (min(a, b), max(a, b))
            if key in listed and listed[key] != cost:
                raise InvalidConfusionTable(f"conflicting costs for pair {key}")
            listed[key] = float(cost)
            matrix[_CODE_BY_CHAR[a], _CODE_BY_CHAR[b]] = cost
            matrix[_CODE_BY_CHAR[b], _CODE_BY_CHAR[a]] = cost
        self._check_triangle(matrix, listed)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.pairs = tuple(sorted((a, b, c) for (a, b), c in listed.items()))

    @staticmethod
    def _check_triangle(matrix: np.ndarray, listed: dict) -> None:
        # Violations can only involve characters that appear in listed pairs:
        # every other direct cost is 1 and no two-step path beats 1 without
        # using two listed edges that share a character.
        chars = sorted({ch for pair in listed for ch in pair})
        idx = [_CODE_BY_CHAR[ch] for ch in chars]
        for i in idx:
            for k in idx:
                if i == k:
                    continue
                direct = matrix[i, k]
                for j in idx:
                    if j in (i, k):
                        continue
                    if matrix[i, j] + matrix[j, k] < direct - 1e-12:
                        raise InvalidConfusionTable(
                            "triangle inequality violated: "
                            f"cost({PLATE_ALPHABET[i]},{PLATE_ALPHABET[k]})={direct} > "
                            f"{matrix[i, j]} + {matrix[j, k]} via {PLATE_ALPHABET[j]}"
                        )

    def cost(self, a: str, b: str) -> float:
        return float(self.matrix[_CODE_BY_CHAR[a.upper()], _CODE_BY_CHAR[b.upper()]])

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ConfusionTable":
        """Load a UTF-8 JSON list of {"a", "b", "cost"} entries."""
        try:
            entries = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfusionTable(f"cannot read confusion table {path}: {exc}") from exc
        if not isinstance(entries, list):
            raise InvalidConfusionTable("confusion table file must hold a JSON list")
        pairs = []
        for entry in entries:
            try:
                pairs.append((entry["a"], entry["b"], float(entry["cost"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidConfusionTable(f"bad confusion entry {entry!r}: {exc}") from exc
        return cls(pairs)


def plate_distance(a: str, b: str, table: ConfusionTable) -> float:
    """Weighted Levenshtein distance between two normalized plate strings."""
    return kernels.weighted_levenshtein(encode_plate(a), encode_plate(b), table.matrix, INDEL_COST)


@dataclass(frozen=True)
class SearchQuery:
    category: VehicleCategory
    plate: str
    fuzz_budget: float = 0.0
    limit: int = 20

    def __post_init__(self):
        if self.fuzz_budget < 0:
            raise ValueError(f"fuzz_budget must be >= 0, got {self.fuzz_budget}")
        if self.limit < 1:
            raise ValueError(f"limit must be >= 1, got {self.limit}")


@dataclass(frozen=True)
class MatchResult:
    record: object  # VehicleRecord; untyped here to keep store optional
    plate_distance: float
    category_match: bool
    found: bool


def match_query(query: SearchQuery, record, table: ConfusionTable) -> MatchResult:
    """Score one stored record against the query.

    Records without a readable plate have infinite distance: they are
    reviewable evidence, never silent drops.
    """
    category_match = query.category is record.category
    reading = getattr(record, "plate_reading", None)
    if reading is None or not reading.text:
        distance = math.inf
    else:
        distance = plate_distance(query.plate, reading.text, table)
    found = category_match and distance <= query.fuzz_budget
    return MatchResult(
        record=record, plate_distance=distance, category_match=category_match, found=found
    )


def search(
    query: SearchQuery,
    records: Iterable,
    table: ConfusionTable,
    limit: int | None = None,
) -> tuple[bool, list[MatchResult]]:
    """Evaluate a query over a record stream.

    Returns (overall verdict, FOUND results ranked by ascending distance,
    ties broken by descending detection score then ingestion order, capped
    at limit).
    """
    limit = query.limit if limit is None else limit
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    hits: list[tuple[float, float, int, MatchResult]] = []
    for position, record in enumerate(records):
        result = match_query(query, record, table)
        if result.found:
            score = float(getattr(record, "detection_score", 0.0))
            hits.append((result.plate_distance, -score, position, result))
    hits.sort(key=lambda item: item[:3])
    ranked = [item[3] for item in hits[:limit]]
    return (len(hits) > 0, ranked)


def iter_match_all(query: SearchQuery, records: Iterable, table: ConfusionTable) -> Iterator[MatchResult]:
    """Every record's MatchResult, FOUND or not, in ingestion order."""
    for record in records:
        yield match_query(query, record, table)

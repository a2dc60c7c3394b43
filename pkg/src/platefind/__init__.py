"""platefind: vehicle search by type and license plate.

Pipeline: detect vehicles (pluggable backend), localize and rectify plates
from dense detection maps, read them with a staged OCR, persist records, and
answer type+plate queries with confusion-aware fuzzy matching.
"""

__version__ = "0.1.0"

from .errors import PlatefindError
from .model import (
    BoundingBox,
    PLATE_ALPHABET,
    Quadrilateral,
    VehicleCategory,
    normalize_plate_string,
    parse_vehicle_category,
)

__all__ = [
    "__version__",
    "PlatefindError",
    "BoundingBox",
    "PLATE_ALPHABET",
    "Quadrilateral",
    "VehicleCategory",
    "normalize_plate_string",
    "parse_vehicle_category",
]

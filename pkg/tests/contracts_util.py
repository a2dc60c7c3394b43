"""Canonical store + queries behind the frozen /api/v1 contract fixtures.

The JSON files under contracts/api_v1/ are consumed by the Python service
tests (drift detection) and by the frontend's mock-server tests. Regenerate
with PF_FREEZE_CONTRACTS=1 pytest tests/test_service.py -k contract.
"""

from __future__ import annotations

from pathlib import Path

from platefind.model import VehicleCategory
from platefind.store import RecordStore

from .conftest import make_record

CONTRACTS_DIR = Path(__file__).resolve().parent.parent / "contracts" / "api_v1"

_REFS = {"vehicle": "crops/{rid}.vehicle.jpg", "plate": "crops/{rid}.plate.png"}


def _with_refs(record, plate: bool = True):
    from platefind.store import with_crop_refs

    refs = {"vehicle": _REFS["vehicle"].format(rid=record.record_id)}
    if plate and record.plate_reading is not None:
        refs["plate"] = _REFS["plate"].format(rid=record.record_id)
    return with_crop_refs(record, refs)


def build_contract_store(root: Path) -> RecordStore:
    """Five fixed records spanning the UI's cases; fully deterministic."""
    store = RecordStore(root)
    records = [
        _with_refs(make_record("contract-a.jpg", "KA01MJ2022", score=0.9)),
        _with_refs(make_record("contract-b.jpg", "MH12NN00", score=0.88, offset=2)),
        _with_refs(
            make_record(
                "contract-c.jpg", None, category=VehicleCategory.TWO_WHEELER, score=0.7, offset=4
            )
        ),
        _with_refs(
            make_record(
                "contract-d.jpg",
                "XY5ABC",
                category=VehicleCategory.THREE_WHEELER,
                score=0.8,
                offset=6,
            )
        ),
        _with_refs(
            make_record(
                "contract-e.jpg",
                "TR4400KP",
                category=VehicleCategory.GT_FOUR_WHEELER,
                score=0.85,
                offset=8,
            )
        ),
    ]
    store.append(records)
    return store


SEARCH_FIXTURES = {
    "search_exact_hit": {"type": "4-wheeler", "plate": "KA01MJ2022", "fuzz": 0.0, "limit": 20},
    "search_mn_fuzz0": {"type": "4-wheeler", "plate": "MH12MM00", "fuzz": 0.0, "limit": 20},
    "search_mn_fuzz05": {"type": "4-wheeler", "plate": "MH12MM00", "fuzz": 0.5, "limit": 20},
}

RECORD_PAGES = {"records_page_0": (0, 2), "records_page_1": (2, 2), "records_page_2": (4, 2)}

import pytest
from hypothesis import given
from hypothesis import strategies as st

from platefind.errors import EmptyPlate, UnknownCategory
from platefind.model import (
    PLATE_ALPHABET,
    BoundingBox,
    Quadrilateral,
    VehicleCategory,
    normalize_plate_string,
    parse_vehicle_category,
)


class TestNormalizePlateString:
    def test_strips_separators_and_uppercases(self):
        assert normalize_plate_string("mh 12-ab 1234") == "MH12AB1234"

    def test_identity_on_clean_input(self):
        assert normalize_plate_string("KA01MJ2022") == "KA01MJ2022"

    def test_all_stripped_raises(self):
        with pytest.raises(EmptyPlate):
            normalize_plate_string("--- ---")

    @given(st.text(max_size=40))
    def test_idempotent(self, raw):
        try:
            once = normalize_plate_string(raw)
        except EmptyPlate:
            return
        assert normalize_plate_string(once) == once

    @given(st.text(max_size=40))
    def test_output_alphabet(self, raw):
        try:
            result = normalize_plate_string(raw)
        except EmptyPlate:
            return
        assert result
        assert all(ch in PLATE_ALPHABET for ch in result)


class TestParseVehicleCategory:
    def test_paper_labels(self):
        assert parse_vehicle_category("4-Wheeler") is VehicleCategory.FOUR_WHEELER
        assert parse_vehicle_category(">4 wheeler") is VehicleCategory.GT_FOUR_WHEELER
        assert parse_vehicle_category("2-wheeler") is VehicleCategory.TWO_WHEELER
        assert parse_vehicle_category("3_Wheeler") is VehicleCategory.THREE_WHEELER
        assert parse_vehicle_category("2wheeler") is VehicleCategory.TWO_WHEELER

    def test_exactly_four_values(self):
        assert len(VehicleCategory) == 4

    def test_unknown_label(self):
        with pytest.raises(UnknownCategory):
            parse_vehicle_category("boat")

    def test_canonical_round_trip(self):
        for category in VehicleCategory:
            assert parse_vehicle_category(category.label) is category


class TestBoundingBox:
    def test_accessors(self):
        box = BoundingBox(10, 20, 110, 70)
        assert (box.width, box.height, box.area) == (100, 50, 5000)

    @pytest.mark.parametrize(
        "coords",
        [(5, 5, 5, 10), (5, 5, 10, 5), (10, 0, 5, 5), (-1, 0, 5, 5), (0, 0, float("nan"), 5)],
    )
    def test_invalid_boxes(self, coords):
        with pytest.raises(ValueError):
            BoundingBox(*coords)

    def test_clip(self):
        box = BoundingBox(50, 50, 200, 120)
        clipped = box.clip(100, 100)
        assert clipped == BoundingBox(50, 50, 100, 100)
        assert BoundingBox(200, 200, 300, 300).clip(100, 100) is None


class TestQuadrilateral:
    def test_valid_square(self):
        quad = Quadrilateral(((0, 0), (10, 0), (10, 10), (0, 10)))
        assert quad.area == pytest.approx(100)
        assert quad.center() == (5, 5)

    def test_reversed_order_rejected(self):
        with pytest.raises(ValueError, match="TL,TR,BR,BL"):
            Quadrilateral(((0, 0), (0, 10), (10, 10), (10, 0)))

    def test_self_intersection_rejected(self):
        with pytest.raises(ValueError):
            Quadrilateral(((0, 0), (10, 10), (10, 0), (0, 10)))

    def test_zero_area_rejected(self):
        with pytest.raises(ValueError):
            Quadrilateral(((0, 0), (10, 0), (20, 0), (30, 0)))

    def test_translation(self):
        quad = Quadrilateral(((0, 0), (10, 0), (10, 10), (0, 10))).translated(5, 7)
        assert quad.corners[0] == (5, 7)
        assert quad.corners[2] == (15, 17)

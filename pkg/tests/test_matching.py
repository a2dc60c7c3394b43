import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platefind.errors import InvalidConfusionTable
from platefind.matching import (
    ConfusionTable,
    SearchQuery,
    iter_match_all,
    match_query,
    plate_distance,
    search,
)
from platefind.model import VehicleCategory

from .conftest import make_record

FOUR = VehicleCategory.FOUR_WHEELER
TWO = VehicleCategory.TWO_WHEELER


def recursive_distance(a: str, b: str, table: ConfusionTable) -> float:
    """Memo-free recursive oracle, straight from the definition."""
    if not a:
        return float(len(b))
    if not b:
        return float(len(a))
    return min(
        recursive_distance(a[1:], b, table) + 1.0,
        recursive_distance(a, b[1:], table) + 1.0,
        recursive_distance(a[1:], b[1:], table) + table.cost(a[0], b[0]),
    )


class TestConfusionTable:
    def test_default_pairs(self):
        table = ConfusionTable()
        assert table.cost("M", "N") == 0.25
        assert table.cost("N", "M") == 0.25
        assert table.cost("0", "O") == 0.25
        assert table.cost("A", "A") == 0.0
        assert table.cost("A", "B") == 1.0

    def test_cost_range_enforced(self):
        with pytest.raises(InvalidConfusionTable):
            ConfusionTable([("A", "B", 0.0)])
        with pytest.raises(InvalidConfusionTable):
            ConfusionTable([("A", "B", 1.5)])
        with pytest.raises(InvalidConfusionTable):
            ConfusionTable([("A", "A", 0.5)])
        with pytest.raises(InvalidConfusionTable):
            ConfusionTable([("A", "#", 0.5)])

    def test_triangle_violation_rejected(self):
        # A-B and B-C cheap makes the implied A-C (default 1) too expensive
        with pytest.raises(InvalidConfusionTable, match="triangle"):
            ConfusionTable([("A", "B", 0.2), ("B", "C", 0.2)])

    def test_chained_pairs_accepted_when_consistent(self):
        table = ConfusionTable([("A", "B", 0.5), ("B", "C", 0.6), ("A", "C", 0.9)])
        assert table.cost("A", "C") == 0.9

    def test_json_file_round_trip(self, tmp_path):
        path = tmp_path / "confusions.json"
        path.write_text(json.dumps([{"a": "M", "b": "N", "cost": 0.25}]), encoding="utf-8")
        table = ConfusionTable.from_json_file(path)
        assert table.pairs == (("M", "N", 0.25),)

    def test_json_file_rejects_violations(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([{"a": "M", "b": "N", "cost": 2.0}]), encoding="utf-8")
        with pytest.raises(InvalidConfusionTable):
            ConfusionTable.from_json_file(path)
        path.write_text("{}", encoding="utf-8")
        with pytest.raises(InvalidConfusionTable):
            ConfusionTable.from_json_file(path)


class TestPlateDistance:
    def test_identity(self):
        assert plate_distance("MH12AB1234", "MH12AB1234", ConfusionTable()) == 0.0

    def test_single_confusable_substitution(self):
        assert plate_distance("MH12N", "MH12M", ConfusionTable()) == 0.25

    def test_double_confusable(self):
        assert plate_distance("MH12MM00", "MH12NN00", ConfusionTable()) == 0.5

    def test_insert_delete_cost_one(self):
        table = ConfusionTable()
        assert plate_distance("ABC", "ABCD", table) == 1.0
        assert plate_distance("ABCD", "ABC", table) == 1.0

    def test_matches_recursive_oracle(self):
        rng = np.random.default_rng(21)
        table = ConfusionTable()
        alphabet = "MN01ABS5"
        for _ in range(300):
            a = "".join(rng.choice(list(alphabet), size=rng.integers(0, 7)))
            b = "".join(rng.choice(list(alphabet), size=rng.integers(0, 7)))
            if not a and not b:
                continue
            got = plate_distance(a or "X", b or "X", table) if not (a and b) else plate_distance(a, b, table)
            want = recursive_distance(a or "X", b or "X", table) if not (a and b) else recursive_distance(a, b, table)
            assert got == pytest.approx(want, abs=1e-12)

    @settings(max_examples=150, deadline=None)
    @given(
        st.text(alphabet="MN05SB", min_size=1, max_size=6),
        st.text(alphabet="MN05SB", min_size=1, max_size=6),
        st.text(alphabet="MN05SB", min_size=1, max_size=6),
    )
    def test_metric_axioms(self, a, b, c):
        table = ConfusionTable()
        dab = plate_distance(a, b, table)
        assert dab >= 0
        assert (dab == 0) == (a == b)
        assert dab == plate_distance(b, a, table)
        assert plate_distance(a, c, table) <= dab + plate_distance(b, c, table) + 1e-9


class TestMatchQuery:
    def test_exact_hit(self):
        record = make_record("img1", "KA01MJ2022")
        query = SearchQuery(FOUR, "KA01MJ2022", fuzz_budget=0.0)
        result = match_query(query, record, ConfusionTable())
        assert result.found and result.plate_distance == 0.0

    def test_category_gate(self):
        record = make_record("img1", "KA01MJ2022", category=TWO)
        query = SearchQuery(FOUR, "KA01MJ2022", fuzz_budget=0.0)
        result = match_query(query, record, ConfusionTable())
        assert not result.found and result.plate_distance == 0.0

    def test_mn_budget_boundary(self):
        record = make_record("img1", "MH12NN00")
        table = ConfusionTable()
        assert match_query(SearchQuery(FOUR, "MH12MM00", 0.5), record, table).found
        assert not match_query(SearchQuery(FOUR, "MH12MM00", 0.4), record, table).found

    def test_unreadable_record_infinite_distance(self):
        record = make_record("img1", None)
        result = match_query(SearchQuery(FOUR, "AB12", 5.0), record, ConfusionTable())
        assert math.isinf(result.plate_distance)
        assert not result.found


class TestSearch:
    def test_empty_store(self):
        verdict, results = search(SearchQuery(FOUR, "AB12", 1.0), [], ConfusionTable())
        assert verdict is False and results == []

    def test_single_hit_comes_first(self):
        records = [make_record("a", "ZZ9999"), make_record("b", "AB1234", offset=5)]
        verdict, results = search(SearchQuery(FOUR, "AB1234", 0.0), records, ConfusionTable())
        assert verdict is True
        assert [r.record.image_id for r in results] == ["b"]

    def test_ranked_by_distance(self):
        records = [
            make_record("d25", "MH12N", offset=1),  # distance 0.25
            make_record("d0", "MH12M", offset=2),  # distance 0
            make_record("d50", "NH12N", offset=3),  # distance 0.5
        ]
        verdict, results = search(SearchQuery(FOUR, "MH12M", 0.5), records, ConfusionTable())
        assert verdict
        assert [r.plate_distance for r in results] == [0.0, 0.25, 0.5]
        assert [r.record.image_id for r in results] == ["d0", "d25", "d50"]

    def test_distance_tie_broken_by_score_then_order(self):
        records = [
            make_record("low", "AB1234", score=0.5, offset=1),
            make_record("high", "AB1234", score=0.9, offset=2),
            make_record("mid_first", "AB1234", score=0.7, offset=3),
            make_record("mid_second", "AB1234", score=0.7, offset=4),
        ]
        _, results = search(SearchQuery(FOUR, "AB1234", 0.0), records, ConfusionTable())
        assert [r.record.image_id for r in results] == ["high", "mid_first", "mid_second", "low"]

    def test_limit_caps_results(self):
        records = [make_record(f"r{i}", "AB1234", offset=i) for i in range(6)]
        verdict, results = search(
            SearchQuery(FOUR, "AB1234", 0.0, limit=2), records, ConfusionTable()
        )
        assert verdict and len(results) == 2

    def test_verdict_is_disjunction_of_per_record_verdicts(self):
        rng = np.random.default_rng(22)
        table = ConfusionTable()
        plates = ["AB1234", "MH12MM00", "XY77", None]
        for _ in range(25):
            records = [
                make_record(f"r{i}", plates[rng.integers(0, len(plates))], offset=i)
                for i in range(int(rng.integers(0, 8)))
            ]
            query = SearchQuery(FOUR, "MH12NN00", float(rng.choice([0.0, 0.5, 1.0])))
            verdict, _ = search(query, records, table)
            individual = [match_query(query, r, table).found for r in records]
            assert verdict == any(individual)

    def test_fuzz_monotonicity(self):
        records = [make_record("a", "MH12NN00")]
        table = ConfusionTable()
        found_at = [
            search(SearchQuery(FOUR, "MH12MM00", t), records, table)[0]
            for t in (0.0, 0.25, 0.5, 0.75, 1.0)
        ]
        assert found_at == sorted(found_at)  # False... then True, never back

    def test_iter_match_all_retains_misses(self):
        records = [make_record("a", None), make_record("b", "AB1234", offset=2)]
        results = list(iter_match_all(SearchQuery(FOUR, "ZZ1", 0.0), records, ConfusionTable()))
        assert len(results) == 2
        assert not any(r.found for r in results)

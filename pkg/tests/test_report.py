import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pr_envelope_ap
from roadaudit._validation import DimensionMismatch
from roadaudit.report import (
    Finding,
    GeoFinding,
    GeoJSONError,
    NoClasses,
    NoGroundTruth,
    average_precision,
    box_iou,
    detection_map,
    findings_table,
    mask_miou,
    read_detections,
    to_geojson,
    validate_geojson,
)
from roadaudit.signs import DetectionBox


def box(x, y, w=10, h=10, score=1.0, cls=1, frame=0):
    return DetectionBox(frame, cls, x, y, w, h, score)


class TestGeoJSON:
    def test_empty(self):
        doc = json.loads(to_geojson([]))
        assert doc == {"type": "FeatureCollection", "features": []}

    def test_axis_order_and_detail(self):
        f = Finding(4, "barrier_unsafe", extent=100.0, detail={"solidity": 0.5, "side": "right"})
        doc = json.loads(to_geojson([GeoFinding(f, 52.0, 5.0)]))
        (feat,) = doc["features"]
        assert feat["geometry"] == {"type": "Point", "coordinates": [5.0, 52.0]}
        assert feat["properties"]["solidity"] == 0.5
        assert feat["properties"]["kind"] == "barrier_unsafe"
        validate_geojson(doc)

    def test_sorted_by_frame(self):
        a = GeoFinding(Finding(3, "marking_damage"), 1.0, 1.0)
        b = GeoFinding(Finding(1, "marking_damage"), 1.0, 1.0)
        doc = json.loads(to_geojson([a, b]))
        assert [f["properties"]["frame_id"] for f in doc["features"]] == [1, 3]

    def test_order_independent(self):
        fs = [
            GeoFinding(Finding(k % 3, kind, detail={"solidity": 0.1, "skew_deg": 12.0}), 10.0 + k, 20.0)
            for k, kind in enumerate(["barrier_unsafe", "sign_skewed", "marking_damage", "barrier_unsafe"])
        ]
        assert to_geojson(fs) == to_geojson(fs[::-1])

    def test_findings_table(self):
        out = json.loads(findings_table([Finding(2, "marking_damage", extent=5)]))
        assert out["findings"][0]["frame_id"] == 2

    @pytest.mark.parametrize(
        "doc",
        [
            {"type": "Feature"},
            {"type": "FeatureCollection"},
            {"type": "FeatureCollection", "features": [{"type": "Feature", "properties": {}}]},
            {
                "type": "FeatureCollection",
                "features": [{"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [200, 0]}}],
            },
            {
                "type": "FeatureCollection",
                "features": [{"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": ["a", 0]}}],
            },
        ],
    )
    def test_validator_rejects(self, doc):
        with pytest.raises(GeoJSONError):
            validate_geojson(doc)

    def test_finding_validation(self):
        with pytest.raises(ValueError):
            Finding(0, "nonsense")
        with pytest.raises(ValueError):
            Finding(0, "barrier_unsafe")
        with pytest.raises(ValueError):
            Finding(0, "road_damage", damage_type="scratch")
        Finding(0, "road_damage", damage_type="pothole")


class TestAP:
    def test_three_predictions(self):
        truth = [box(0, 0), box(50, 50)]
        preds = [box(0, 0, score=0.9), box(100, 100, score=0.8), box(50, 50, score=0.7)]
        flags = [1, 0, 1]
        expected = pr_envelope_ap(flags, 2)
        # Hand integration: recall 0.5 at precision 1, then 0.5 more at 2/3.
        assert expected == pytest.approx(5 / 6, abs=1e-15)
        got = detection_map(preds, truth)
        assert abs(got["map"] - 5 / 6) <= 1e-9
        assert abs(got["per_class"][1] - expected) <= 1e-9

    def test_identical_predictions(self):
        truth = [box(0, 0), box(30, 5, cls=2), box(3, 3, frame=1)]
        preds = [DetectionBox(b.frame_id, b.class_id, b.x, b.y, b.w, b.h, s) for b, s in zip(truth, [0.1, 0.5, 0.2])]
        assert detection_map(preds, truth)["map"] == 1.0

    def test_no_predictions(self):
        assert detection_map([], [box(0, 0)])["map"] == 0.0

    def test_no_truth(self):
        with pytest.raises(NoGroundTruth):
            detection_map([box(0, 0)], [])
        with pytest.raises(NoGroundTruth):
            average_precision([1], 0)

    def test_bad_iou(self):
        with pytest.raises(ValueError):
            detection_map([], [box(0, 0)], iou_threshold=1.0)

    def test_duplicate_counts_once(self):
        res = detection_map([box(0, 0, score=0.9), box(0, 0, score=0.8)], [box(0, 0)])
        assert res["map"] == 1.0  # the duplicate lands after full recall

    def test_box_iou(self):
        assert box_iou(box(0, 0), box(0, 0)) == 1.0
        assert box_iou(box(0, 0), box(5, 0)) == pytest.approx(50 / 150)
        assert box_iou(box(0, 0), box(10, 0)) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 1), max_size=30), st.integers(1, 30))
    def test_ap_matches_oracle(self, flags, n_truth):
        n_truth = max(n_truth, sum(flags))
        ap = average_precision(flags, n_truth)
        assert 0.0 <= ap <= 1.0
        assert ap == pytest.approx(pr_envelope_ap(flags, n_truth), abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone_score_invariance(self, seed):
        rng = np.random.default_rng(seed)
        truth, preds = [], []
        for frame in range(4):
            for _ in range(3):
                x, y, c = rng.integers(0, 80), rng.integers(0, 80), int(rng.integers(1, 4))
                truth.append(box(x, y, cls=c, frame=frame))
                if rng.random() < 0.8:
                    preds.append(box(x + rng.integers(-4, 5), y + rng.integers(-4, 5), score=rng.random(), cls=c, frame=frame))
            for _ in range(2):
                preds.append(box(rng.integers(0, 80), rng.integers(0, 80), score=rng.random(), cls=int(rng.integers(1, 4)), frame=frame))
        base = detection_map(preds, truth)
        for fn in (lambda s: s * s, lambda s: np.exp(3 * s) - 7, lambda s: s**0.25):
            moved = [DetectionBox(p.frame_id, p.class_id, p.x, p.y, p.w, p.h, float(fn(p.score))) for p in preds]
            assert detection_map(moved, truth) == base
        assert base["map"] == pytest.approx(np.mean(list(base["per_class"].values())))

    def test_read_detections(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(json.dumps(box(1, 2).to_record()) + "\n\n")
        assert read_detections(p) == [box(1, 2)]
        p.write_text('{"frame_id": 0}\n')
        with pytest.raises(ValueError):
            read_detections(p)


class TestMiou:
    def test_identical(self, rng):
        m = rng.integers(0, 4, (8, 8), dtype=np.uint8)
        assert mask_miou(m, m, {0, 1, 2, 3}) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), np.uint8)
        b = np.zeros((4, 4), np.uint8)
        a[0, :2] = 1
        b[3, :2] = 1
        assert mask_miou(a, b, {1}) == 0.0

    def test_shifted_square(self):
        t = np.zeros((5, 5), np.uint8)
        p = np.zeros((5, 5), np.uint8)
        t[1:3, 1:3] = 1
        p[1:3, 2:4] = 1
        assert mask_miou(p, t, {1}) == 1 / 3

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            mask_miou(np.zeros((2, 2), np.uint8), np.zeros((2, 3), np.uint8), {0})
        with pytest.raises(NoClasses):
            mask_miou(np.zeros((2, 2), np.uint8), np.zeros((2, 2), np.uint8), {5})

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric_and_unit_iff_equal(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 3, (6, 6), dtype=np.uint8)
        b = a.copy()
        b[rng.integers(0, 6), rng.integers(0, 6)] = (b[0, 0] + 1) % 3
        classes = {0, 1, 2}
        assert mask_miou(a, b, classes) == mask_miou(b, a, classes)
        assert (mask_miou(a, b, classes) == 1.0) == np.array_equal(a, b)

"""Acceptance gate: one PASS/FAIL line per criterion, each also a test.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""
import json
import math
import shutil
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import ndimage

from conftest import PATCH, marking_fixture, multi_frame_scene
from oracles import brute_hull_vertices, comb_corner_polygon, hull_area, pr_envelope_ap, shoelace, sweep_rect_area
from roadaudit.barriers import BarrierParams, assess_barriers
from roadaudit.geometry import convex_hull, min_area_rect
from roadaudit.geotag import FrameClock, geolocate, interpolate, parse_track
from roadaudit.marking import MarkingParams, marking_damage
from roadaudit.raster import decode_netpbm, encode_netpbm, load_image, save_image
from roadaudit.report import Finding, detection_map, mask_miou
from roadaudit.signs import DetectionBox, pole_skew
from roadaudit.superpixel import SlicParams, slic
from roadaudit.synthetic import comb, rotated_bar, write_demo_scene


@contextmanager
def criterion(name, budget=None):
    """Print PASS/FAIL for the block; fail when over the time budget."""
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.2f} s, budget {budget} s"
    except BaseException as exc:
        print(f"\nFAIL {name}: {exc}")
        raise
    timing = f" ({time.perf_counter() - start:.2f} s)"
    print(f"\nPASS {name}{timing}")


def test_c01_published_scores_out_of_scope():
    with criterion("c01 published model scores out of scope (informational; c02-c10 substitute)"):
        # The trained detectors and datasets are out of scope; only the metric
        # definitions ship, and they are checked in c08.
        assert callable(detection_map) and callable(mask_miou)


BARRIER = 3


def _place(shape, col, width=320, height=120):
    mask = np.zeros((height, width), np.uint8)
    c = comb(**shape)
    mask[20 : 20 + c.shape[0], col : col + c.shape[1]][c == 1] = BARRIER
    return mask


def test_c02_barrier_suite():
    comb_055 = dict(rail_width=101, rail_height=21, post_height=40, n_posts=4, post_width=9)
    comb_070 = dict(rail_width=101, rail_height=21, post_height=40, n_posts=5, post_width=12)

    def oracle(shape):
        poly = comb_corner_polygon(**shape)
        return shoelace(poly) / hull_area(poly)

    o055, o070 = oracle(comb_055), oracle(comb_070)
    assert abs(o055 - 0.55) < 0.01 and o070 == pytest.approx(0.7)
    quad = np.zeros((120, 320), np.uint8)
    pts = [(200, 20), (290, 30), (280, 100), (210, 90)]
    yy, xx = np.mgrid[0:120, 0:320]
    inside = np.ones_like(quad, bool)
    for k in range(4):
        (x1, y1), (x2, y2) = pts[k], pts[(k + 1) % 4]
        inside &= (x2 - x1) * (yy - y1) - (y2 - y1) * (xx - x1) >= 0
    quad[inside] = BARRIER
    p = BarrierParams({BARRIER}, right_threshold=0.8, left_threshold=0.6)

    with criterion("c02 barrier suite safe/unsafe/safe, solidity within 0.02 of oracle", budget=1.0):
        (q,) = assess_barriers(quad, 320, p)
        assert q.side == "right" and q.safe and q.solidity >= 0.95
        (r,) = assess_barriers(_place(comb_055, 200), 320, p)
        assert r.side == "right" and not r.safe
        assert abs(r.solidity - o055) <= 0.02
        (left,) = assess_barriers(_place(comb_070, 20), 320, p)
        assert left.side == "left" and left.safe
        assert abs(left.solidity - o070) <= 0.02
        (mirror,) = assess_barriers(_place(comb_070, 20)[:, ::-1].copy(), 320, p)
        assert mirror.side == "right" and not mirror.safe


def test_c03_skew_recovery():
    def scene(alpha):
        mask = np.zeros((160, 160), np.uint8)
        sign = (80.0, 20.0)
        a = math.radians(alpha)
        center = (sign[0] + 30 * math.sin(a), 45 + 30 * math.cos(a))
        mask[rotated_bar(mask.shape, center, 60, 4, alpha) == 1] = 2
        return mask, sign

    with criterion("c03 skew recovery within 1 deg, vertical within 0.5 deg", budget=1.0):
        for alpha in range(0, 31, 5):
            mask, sign = scene(alpha)
            theta = pole_skew(mask, 2, sign)
            assert abs(theta - alpha) <= 1.0, (alpha, theta)
        mask = np.zeros((100, 60), np.uint8)
        mask[30:90, 28:32] = 2
        assert pole_skew(mask, 2, (29.5, 10.0)) <= 0.5


def test_c04_hull_and_rect_oracles():
    rng = np.random.default_rng(4)
    hull_sets = [rng.integers(0, 101, (int(rng.integers(1, 51)), 2)) for _ in range(200)]
    rect_sets = [rng.integers(0, 101, (int(rng.integers(3, 51)), 2)) for _ in range(100)]
    with criterion("c04 hull equals brute force on 200 sets, rect beats 0.5 deg sweep on 100", budget=10.0):
        for pts in hull_sets:
            assert {tuple(v) for v in convex_hull(pts).tolist()} == brute_hull_vertices(pts)
        for pts in rect_sets:
            assert min_area_rect(pts).area <= sweep_rect_area(pts) * (1 + 1e-6)


def test_c05_marking_fixtures():
    p = MarkingParams(marking_classes={1}, superpixel_area=64)
    with criterion("c05 marking pristine -> 0 regions, patch -> 1 region covering it", budget=2.0):
        assert marking_damage(*marking_fixture(False), p) == []
        regions = marking_damage(*marking_fixture(True), p)
        assert len(regions) == 1
        x, y, w, h = regions[0].bbox
        pr, pc = PATCH
        assert x <= pc and y <= pr and pc + 6 <= x + w and pr + 6 <= y + h
        assert 36 <= regions[0].area <= 4 * 36


def test_c06_slic_properties():
    four = ndimage.generate_binary_structure(2, 1)
    with criterion("c06 SLIC connectivity, count, tiling, edge recall", budget=2.0):
        lab = slic(np.full((20, 20), 128, np.uint8), SlicParams(k=4, compactness=10))
        assert 2 <= lab.count <= 6
        assert lab.sizes().sum() == 400 and lab.sizes().min() > 0
        for k in range(lab.count):
            assert ndimage.label(lab.labels == k, structure=four)[1] == 1
        img = np.zeros((40, 40), np.uint8)
        img[:, 20:] = 255
        labels = slic(img, SlicParams(k=8)).labels
        recall = np.mean([np.any(row[18:22][1:] != row[18:22][:-1]) for row in labels])
        assert recall >= 0.9


def test_c07_geotag(tmp_path):
    track = parse_track("t,lat,lon\n0,52.0,5.0\n10,52.001,5.001\n")
    manifest = write_demo_scene(tmp_path / "scene")
    with criterion("c07 geotag exact at fixes, midpoint, clamping, end-to-end"):
        assert interpolate(track, 0) == (52.0, 5.0)
        assert interpolate(track, 10) == (52.001, 5.001)
        lat, lon = interpolate(track, 5)
        assert abs(lat - 52.0005) <= 1e-9 and abs(lon - 5.0005) <= 1e-9
        assert interpolate(track, -3) == (52.0, 5.0)
        assert interpolate(track, 42) == (52.001, 5.001)
        (g,) = geolocate([Finding(50, "marking_damage")], track, FrameClock(10))
        assert abs(g.lat - 52.0005) <= 1e-9
        from roadaudit.pipeline import run

        run(manifest, tmp_path / "o.geojson")
        feats = json.loads((tmp_path / "o.geojson").read_text())["features"]
        assert len(feats) == 3
        for f in feats:
            flon, flat = f["geometry"]["coordinates"]
            assert abs(flat - 52.0005) <= 1e-6 and abs(flon - 5.0005) <= 1e-6


def test_c08_metric_oracles():
    def b(x, y, s=1.0):
        return DetectionBox(0, 1, x, y, 10, 10, s)

    truth = [b(0, 0), b(50, 50)]
    preds = [b(0, 0, 0.9), b(100, 100, 0.8), b(50, 50, 0.7)]
    with criterion("c08 AP 5/6, shifted-square mIoU 1/3, identity 1, score-squaring invariance"):
        hand = pr_envelope_ap([1, 0, 1], 2)
        assert abs(hand - 5 / 6) <= 1e-12
        assert abs(detection_map(preds, truth)["map"] - hand) <= 1e-9
        t = np.zeros((5, 5), np.uint8)
        p = np.zeros((5, 5), np.uint8)
        t[1:3, 1:3] = 1
        p[1:3, 2:4] = 1
        assert mask_miou(p, t, {1}) == 1 / 3
        assert mask_miou(t, t, {1}) == 1.0
        rng = np.random.default_rng(8)
        gt = [DetectionBox(f, 1 + f % 2, *rng.integers(0, 90, 2), 10, 10) for f in range(6) for _ in range(3)]
        pr = [
            DetectionBox(g.frame_id, g.class_id, g.x + rng.integers(-3, 4), g.y + rng.integers(-3, 4), 10, 10, rng.random())
            for g in gt
        ] + [DetectionBox(f, 1, *rng.integers(0, 90, 2), 10, 10, rng.random()) for f in range(6)]
        squared = [DetectionBox(q.frame_id, q.class_id, q.x, q.y, q.w, q.h, q.score**2) for q in pr]
        assert detection_map(pr, gt) == detection_map(squared, gt)


def _cli():
    exe = shutil.which("roadaudit")
    return [exe] if exe else [sys.executable, "-m", "roadaudit.cli"]


def test_c09_determinism_across_jobs(tmp_path):
    bundled = write_demo_scene(tmp_path / "bundled")
    multi = multi_frame_scene(tmp_path / "multi", 8)
    with criterion("c09 roadaudit run --jobs 1 and --jobs 8 byte-identical"):
        for manifest in (bundled, multi):
            outs = []
            for jobs in (1, 8):
                out = manifest.parent / f"out{jobs}.geojson"
                proc = subprocess.run(
                    _cli() + ["run", "--manifest", str(manifest), "--output", str(out), "--jobs", str(jobs)],
                    capture_output=True,
                    text=True,
                )
                assert proc.returncode == 0, proc.stderr
                outs.append(out.read_bytes())
            assert outs[0] == outs[1]
            assert json.loads(outs[0])["features"]


def test_c10_netpbm_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    with criterion("c10 Netpbm P5/P6 round trip bit-exact over 100 trials"):
        for trial in range(100):
            h, w = (int(v) for v in rng.integers(1, 40, 2))
            shape = (h, w) if trial % 2 == 0 else (h, w, 3)
            img = rng.integers(0, 256, shape, dtype=np.uint8)
            path = tmp_path / ("a.pgm" if img.ndim == 2 else "a.ppm")
            save_image(path, img)
            back = load_image(path)
            assert back.dtype == np.uint8 and np.array_equal(back, img)
            assert np.array_equal(decode_netpbm(encode_netpbm(img)), img)

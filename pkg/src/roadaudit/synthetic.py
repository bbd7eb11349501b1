"""Synthetic rasters and a small demo scene.

These draw the shapes the analyzers look for (rotated poles, guardrail
combs, worn marking patches) so that the pipeline can be exercised end to end
without upstream models.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .raster import save_image


def rotated_bar(shape, center, length, width, angle_deg, value=1, dtype=np.uint8) -> np.ndarray:
    """Rasterize a ``width`` x ``length`` bar whose long axis is tilted
    ``angle_deg`` clockwise from the image vertical. Pixel centres inside
    the bar (half-open on the positive side) are set to ``value``."""
    h, w = shape
    out = np.zeros((h, w), dtype=dtype)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    a = math.radians(angle_deg)
    dx = xx - center[0]
    dy = yy - center[1]
    along = dx * math.sin(a) + dy * math.cos(a)
    across = dx * math.cos(a) - dy * math.sin(a)
    inside = (along >= -length / 2) & (along < length / 2) & (across >= -width / 2) & (across < width / 2)
    out[inside] = value
    return out


def comb(rail_width, rail_height, post_height, n_posts, post_width) -> np.ndarray:
    """Guardrail silhouette: a horizontal rail with posts hanging beneath.

    Posts are spread evenly with the first and last flush with the rail ends,
    leaving open gaps under the rail.
    """
    h = rail_height + post_height
    out = np.zeros((h, rail_width), dtype=np.uint8)
    out[:rail_height, :] = 1
    if n_posts == 1:
        starts = [0]
    else:
        span = rail_width - post_width
        starts = [round(k * span / (n_posts - 1)) for k in range(n_posts)]
    for s in starts:
        out[rail_height:, s : s + post_width] = 1
    return out


def checker(size, period=1, low=40, high=220) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return np.where((yy // period + xx // period) % 2 == 0, low, high).astype(np.uint8)


def sign_pattern(size=64) -> np.ndarray:
    """A ring-and-bar sign face with plenty of structure for correlation."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    r = np.hypot(xx - c, yy - c)
    img = np.full((size, size), 90.0)
    img[r < size * 0.48] = 235.0
    img[r < size * 0.40] = 250.0
    img[(r < size * 0.48) & (r >= size * 0.40)] = 200.0
    img[(np.abs(yy - c) < size * 0.08) & (r < size * 0.36)] = 30.0
    img[(np.abs(xx - c) < size * 0.05) & (yy < c) & (r < size * 0.36)] = 120.0
    return img.astype(np.uint8)


# ------------------------------------------------------------- demo scene

CLASS_MAP = {"marking": [1], "pole": [2], "barrier": [3], "sign": [10], "alligator": [20],
             "transverse": [21], "longitudinal": [22], "missing_marking": [23], "pothole": [24]}

SCENE_SIZE = (240, 320)
MARKING_BOX = (180, 204, 40, 116)  # rows, cols
PATCH_ORIGIN = (189, 75)
PATCH_SIZE = 6
SIGN_BOX = (30, 20, 64, 64)  # x, y, w, h
POLE_ANGLE = 20.0
COMB_ORIGIN = (90, 200)  # row, col of the rail's top-left pixel
COMB_SHAPE = dict(rail_width=101, rail_height=21, post_height=40, n_posts=4, post_width=9)
TRACK = "t,lat,lon\n0,52.0,5.0\n10,52.001,5.001\n"
FRAME_ID = 50
FPS = 10.0


def scene_layers():
    """Gray frame and class mask of the demo scene."""
    h, w = SCENE_SIZE
    gray = np.full((h, w), 40, dtype=np.uint8)
    mask = np.zeros((h, w), dtype=np.uint8)

    r0, r1, c0, c1 = MARKING_BOX
    gray[r0:r1, c0:c1] = 220
    mask[r0:r1, c0:c1] = 1
    pr, pc = PATCH_ORIGIN
    gray[pr : pr + PATCH_SIZE, pc : pc + PATCH_SIZE] = checker(PATCH_SIZE)

    x, y, sw, sh = SIGN_BOX
    gray[y : y + sh, x : x + sw] = sign_pattern(sw)
    mask[y : y + sh, x : x + sw] = 4

    length = 60
    a = math.radians(POLE_ANGLE)
    top = (x + (sw - 1) / 2.0, y + sh + 2)
    center = (top[0] + length / 2 * math.sin(a), top[1] + length / 2 * math.cos(a))
    pole = rotated_bar((h, w), center, length, 4, POLE_ANGLE)
    gray[pole == 1] = 130
    mask[pole == 1] = 2

    cm = comb(**COMB_SHAPE)
    br, bc = COMB_ORIGIN
    region = mask[br : br + cm.shape[0], bc : bc + cm.shape[1]]
    region[cm == 1] = 3
    gray[br : br + cm.shape[0], bc : bc + cm.shape[1]][cm == 1] = 160
    return gray, mask


def write_demo_scene(out_dir) -> Path:
    """Write the demo scene and return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gray, mask = scene_layers()
    save_image(out / "frame050.ppm", np.repeat(gray[:, :, None], 3, axis=2))
    save_image(out / "mask050.pgm", mask)
    x, y, sw, sh = SIGN_BOX
    det = {"frame_id": FRAME_ID, "class_id": 10, "x": x, "y": y, "w": sw, "h": sh, "score": 0.9}
    (out / "det050.jsonl").write_text(json.dumps(det) + "\n", encoding="utf-8")
    (out / "refs" / "10").mkdir(parents=True, exist_ok=True)
    save_image(out / "refs" / "10" / "0.pgm", sign_pattern(64))
    (out / "track.csv").write_text(TRACK, encoding="utf-8")
    manifest = {
        "frames": [
            {
                "frame_id": FRAME_ID,
                "image_path": "frame050.ppm",
                "mask_path": "mask050.pgm",
                "detections_path": "det050.jsonl",
            }
        ],
        "class_map": CLASS_MAP,
        "track_path": "track.csv",
        "clock": {"fps": FPS, "t0": 0.0},
        "reference_dir": "refs",
        "params": {
            "marking": {
                "threshold_window": 15,
                "threshold_offset": -10,
                "density_threshold": 0.3,
                "superpixel_area": 64,
                "smooth_window": 5,
            },
            "barrier": {"right_threshold": 0.8, "left_threshold": 0.6, "min_area": 400},
            "signs": {"sim_threshold": 0.6, "skew_threshold": 10.0},
            "extent_from_box": True,
        },
    }
    path = out / "scene.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path

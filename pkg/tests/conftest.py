from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from roadaudit.marking import MarkingParams  # noqa: E402
from roadaudit.synthetic import checker  # noqa: E402

MARKING_ROWS = (20, 44)
MARKING_COLS = (10, 86)
PATCH = (29, 45)  # row, col of the eroded patch's top-left pixel


def marking_fixture(patch: bool, period: int = 1):
    gray = np.full((64, 96), 40, dtype=np.uint8)
    mask = np.zeros_like(gray)
    r0, r1 = MARKING_ROWS
    c0, c1 = MARKING_COLS
    gray[r0:r1, c0:c1] = 220
    mask[r0:r1, c0:c1] = 1
    if patch:
        pr, pc = PATCH
        gray[pr : pr + 6, pc : pc + 6] = checker(6, period)
    return gray, mask


@pytest.fixture
def marking_params():
    return MarkingParams(marking_classes={1}, superpixel_area=64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def multi_frame_scene(out_dir, n_frames=6):
    """Demo scene with its frame repeated under several frame ids, so that a
    parallel run really spreads work over processes."""
    import json

    from roadaudit.synthetic import write_demo_scene

    manifest = write_demo_scene(out_dir)
    doc = json.loads(manifest.read_text())
    base = doc["frames"][0]
    frames = []
    det = json.loads((manifest.parent / base["detections_path"]).read_text())
    for fid in range(0, 10 * n_frames, 10):
        name = f"det{fid:03d}.jsonl"
        (manifest.parent / name).write_text(json.dumps(dict(det, frame_id=fid)) + "\n")
        frames.append(dict(base, frame_id=fid, detections_path=name))
    doc["frames"] = frames
    manifest.write_text(json.dumps(doc, indent=2))
    return manifest

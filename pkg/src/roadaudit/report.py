"""Findings, GeoJSON export and the detection / segmentation metrics."""
from __future__ import annotations

import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._validation import DimensionMismatch, check_gray
from .signs import DetectionBox

ROAD_DAMAGE_TYPES = ("alligator", "transverse", "longitudinal", "missing_marking", "pothole")
FINDING_KINDS = ("road_damage", "marking_damage", "sign_damaged", "sign_skewed", "barrier_unsafe")
REQUIRED_DETAIL = {"barrier_unsafe": ("solidity",), "sign_skewed": ("skew_deg",)}


class NoGroundTruth(ValueError):
    pass


class NoClasses(ValueError):
    pass


class GeoJSONError(ValueError):
    pass


@dataclass
class Finding:
    frame_id: int
    kind: str
    extent: float | None = None
    score: float | None = None
    detail: dict = field(default_factory=dict)
    damage_type: str | None = None  # road_damage only

    def __post_init__(self):
        if self.kind not in FINDING_KINDS:
            raise ValueError(f"unknown finding kind {self.kind!r}")
        if self.kind == "road_damage" and self.damage_type not in ROAD_DAMAGE_TYPES:
            raise ValueError(f"road_damage needs a damage_type in {ROAD_DAMAGE_TYPES}, got {self.damage_type!r}")
        missing = [k for k in REQUIRED_DETAIL.get(self.kind, ()) if k not in self.detail]
        if missing:
            raise ValueError(f"{self.kind} finding lacks detail keys {missing}")

    def properties(self) -> dict:
        props = {"kind": self.kind, "frame_id": self.frame_id, "extent": self.extent, "score": self.score}
        if self.damage_type is not None:
            props["damage_type"] = self.damage_type
        for k, v in self.detail.items():
            props.setdefault(k, v)
        return props


@dataclass
class GeoFinding:
    finding: Finding
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"coordinate ({self.lat}, {self.lon}) outside WGS84 range")


def _sort_key(props: dict) -> tuple:
    return (props["frame_id"], props["kind"], json.dumps(props, sort_keys=True))


def to_geojson(findings: Iterable[GeoFinding]) -> str:
    """FeatureCollection of Point features, ordered by frame then kind."""
    feats = []
    for g in findings:
        props = g.finding.properties()
        feat = {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [g.lon, g.lat]},
            "properties": props,
        }
        feats.append(((props["frame_id"], props["kind"], json.dumps(feat, sort_keys=True)), feat))
    feats.sort(key=lambda kv: kv[0])
    doc = {"type": "FeatureCollection", "features": [f for _, f in feats]}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def findings_table(findings: Iterable[Finding]) -> str:
    """JSON listing of findings that carry no position."""
    rows = sorted((f.properties() for f in findings), key=_sort_key)
    return json.dumps({"findings": rows}, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate_geojson(doc) -> None:
    """Minimal structural check of a FeatureCollection of Points.

    Accepts a parsed document or JSON text and raises ``GeoJSONError``.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise GeoJSONError("top level must be a FeatureCollection")
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise GeoJSONError("features must be an array")
    for k, f in enumerate(feats):
        if not isinstance(f, dict) or f.get("type") != "Feature":
            raise GeoJSONError(f"feature {k} is not a Feature")
        if "properties" not in f or not (f["properties"] is None or isinstance(f["properties"], dict)):
            raise GeoJSONError(f"feature {k} has no properties object")
        geom = f.get("geometry")
        if not isinstance(geom, dict) or geom.get("type") != "Point":
            raise GeoJSONError(f"feature {k} geometry is not a Point")
        coords = geom.get("coordinates")
        if not isinstance(coords, list) or len(coords) not in (2, 3) or not all(_is_number(c) for c in coords):
            raise GeoJSONError(f"feature {k} coordinates must be a numeric [lon, lat] pair")
        lon, lat = coords[0], coords[1]
        if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
            raise GeoJSONError(f"feature {k} coordinates out of range: {coords}")


# ----------------------------------------------------------------- metrics


def read_detections(path: str | os.PathLike) -> list[DetectionBox]:
    """Read JSON-lines detection records, skipping blank lines."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(DetectionBox.from_record(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad detection record ({exc})") from exc
    return out


def box_iou(a: DetectionBox, b: DetectionBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def average_precision(tp_flags, n_truth: int) -> float:
    """All-points interpolated AP for a ranked list of TP/FP flags."""
    if n_truth == 0:
        raise NoGroundTruth("no ground truth for this class")
    tp = np.asarray(tp_flags, dtype=np.float64)
    if tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    recall = ctp / n_truth
    precision = ctp / np.arange(1, tp.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def detection_map(preds: Iterable[DetectionBox], truth: Iterable[DetectionBox], iou_threshold: float = 0.5) -> dict:
    """Per-class AP and their mean over classes having ground truth.

    Predictions are ranked by descending score (input order breaks ties) and
    greedily matched to the unmatched ground-truth box of highest IoU in the
    same frame, counting as a true positive when that IoU reaches
    ``iou_threshold``.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    gt: dict[int, dict[int, list[DetectionBox]]] = defaultdict(lambda: defaultdict(list))
    for b in truth:
        gt[b.class_id][b.frame_id].append(b)
    if not gt:
        raise NoGroundTruth("ground truth is empty")
    by_class: dict[int, list[tuple[int, DetectionBox]]] = defaultdict(list)
    for k, b in enumerate(preds):
        by_class[b.class_id].append((k, b))

    per_class = {}
    for cls in sorted(gt):
        frames = gt[cls]
        n_truth = sum(len(v) for v in frames.values())
        used = {fid: [False] * len(v) for fid, v in frames.items()}
        ranked = sorted(by_class.get(cls, []), key=lambda kb: (-kb[1].score, kb[0]))
        flags = []
        for _, p in ranked:
            best, best_j = 0.0, -1
            for j, g in enumerate(frames.get(p.frame_id, ())):
                if used[p.frame_id][j]:
                    continue
                iou = box_iou(p, g)
                if iou > best:
                    best, best_j = iou, j
            if best_j >= 0 and best >= iou_threshold:
                used[p.frame_id][best_j] = True
                flags.append(1)
            else:
                flags.append(0)
        per_class[cls] = average_precision(flags, n_truth)
    return {"per_class": per_class, "map": float(np.mean(list(per_class.values())))}


def mask_miou(pred: np.ndarray, truth: np.ndarray, classes) -> float:
    """Mean per-class IoU over ``classes`` present in either mask."""
    pred = check_gray(pred, "pred mask")
    truth = check_gray(truth, "truth mask")
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    ious = []
    for c in sorted(int(c) for c in classes):
        p = pred == c
        t = truth == c
        union = np.count_nonzero(p | t)
        if union == 0:
            continue
        ious.append(np.count_nonzero(p & t) / union)
    if not ious:
        raise NoClasses("none of the classes occur in either mask")
    return float(np.mean(ious))

"""Manifest-driven scene processing.

A manifest is one JSON document::

    {
      "frames": [{"frame_id": 0, "image_path": "f0.ppm", "mask_path": "m0.pgm",
                  "detections_path": "d0.jsonl"}],
      "class_map": {"marking": [1], "pole": [2], "barrier": [3], "sign": [10],
                    "pothole": [24], ...},
      "track_path": "track.csv",
      "clock": {"fps": 10, "t0": 0},
      "reference_dir": "refs",
      "params": {"marking": {...}, "slic": {...}, "barrier": {...},
                 "signs": {...}, "extent_from_box": true}
    }

Relative paths resolve against the manifest's directory.
"""
from __future__ import annotations

import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .barriers import BarrierParams, assess_barriers
from .geotag import FrameClock, TrackError, geolocate, load_track
from .marking import MarkingParams, analyze_marking
from .raster import load_image, load_mask, save_image, to_gray
from .report import (
    FINDING_KINDS,
    ROAD_DAMAGE_TYPES,
    Finding,
    findings_table,
    read_detections,
    to_geojson,
)
from .signs import ReferenceLibrary, SignParams, classify_sign
from .superpixel import SlicParams

log = logging.getLogger(__name__)

REQUIRED_CLASSES = ("marking", "pole", "sign", "barrier")


class ManifestInvalid(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class OutputError(OSError):
    pass


@dataclass(frozen=True)
class FrameSpec:
    frame_id: int
    image_path: Path
    mask_path: Path
    detections_path: Path | None = None


@dataclass(frozen=True)
class SceneConfig:
    """Everything a frame worker needs; picklable."""

    class_map: dict
    marking: MarkingParams
    barrier: BarrierParams
    signs: SignParams
    extent_from_box: bool = True
    library: ReferenceLibrary | None = None

    @property
    def sign_classes(self) -> frozenset:
        return frozenset(self.class_map.get("sign", ()))

    def road_damage_type(self, class_id: int) -> str | None:
        for name in ROAD_DAMAGE_TYPES:
            if class_id in self.class_map.get(name, ()):
                return name
        return None


@dataclass
class Scene:
    root: Path
    frames: list[FrameSpec]
    config: SceneConfig
    clock: FrameClock
    track_path: Path | None = None
    reference_dir: Path | None = None


@dataclass
class FrameResult:
    frame_id: int
    findings: list[Finding] = field(default_factory=list)
    diagnostics: Counter = field(default_factory=Counter)
    error: str | None = None


@dataclass
class RunSummary:
    counts: dict
    frames_processed: int
    diagnostics: dict

    def to_dict(self) -> dict:
        return {"counts": self.counts, "frames_processed": self.frames_processed, "diagnostics": self.diagnostics}


# ------------------------------------------------------------ manifest


def _ids(value) -> list[int]:
    if isinstance(value, bool):
        raise TypeError("class ids must be integers")
    if isinstance(value, int):
        return [value]
    ids = list(value)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in ids):
        raise TypeError("class ids must be integers")
    return ids


def _read_manifest(path: Path) -> tuple[dict | None, list[str]]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        return None, [f"manifest not found: {path}"]
    except (OSError, ValueError) as exc:
        return None, [f"manifest unreadable: {exc}"]
    if not isinstance(doc, dict):
        return None, ["manifest must be a JSON object"]
    return doc, []


def _build(doc: dict, root: Path) -> tuple[Scene | None, list[str]]:
    problems: list[str] = []

    def resolve(p):
        return (root / p) if p is not None else None

    # class map
    class_map: dict[str, list[int]] = {}
    raw_map = doc.get("class_map")
    if not isinstance(raw_map, dict):
        problems.append("class_map missing or not an object")
        raw_map = {}
    for name, value in raw_map.items():
        try:
            class_map[name] = _ids(value)
        except TypeError:
            problems.append(f"class_map.{name}: class ids must be integers")
    for name in REQUIRED_CLASSES:
        if name not in raw_map:
            problems.append(f"class_map lacks required entry '{name}'")
    for name, ids in class_map.items():
        bad = [i for i in ids if not 0 <= i <= 255]
        if bad:
            problems.append(f"class_map.{name}: ids out of range [0, 255]: {bad}")

    # params
    params = doc.get("params") or {}
    if not isinstance(params, dict):
        problems.append("params must be an object")
        params = {}

    def section(name):
        sec = params.get(name) or {}
        if not isinstance(sec, dict):
            problems.append(f"params.{name} must be an object")
            return {}
        return sec

    slic_params = None
    slic_sec = section("slic")
    if slic_sec.get("k") is not None:
        try:
            slic_params = SlicParams(**slic_sec)
        except (TypeError, ValueError) as exc:
            problems.append(f"params.slic: {exc}")
    elif slic_sec:
        problems.append("params.slic: 'k' is required when the section is given")

    mk = dict(section("marking"))
    dt = mk.get("density_threshold", 0.3)
    if not isinstance(dt, (int, float)) or not 0.0 <= dt <= 1.0:
        problems.append(f"params.marking.density_threshold out of range [0, 1]: {dt}")
    marking = None
    try:
        marking = MarkingParams(marking_classes=frozenset(class_map.get("marking", ())), slic=slic_params, **mk)
    except (TypeError, ValueError) as exc:
        if "density_threshold" not in str(exc):
            problems.append(f"params.marking: {exc}")

    barrier = None
    try:
        barrier = BarrierParams(barrier_classes=frozenset(class_map.get("barrier", ())), **section("barrier"))
    except (TypeError, ValueError) as exc:
        problems.append(f"params.barrier: {exc}")

    signs = None
    try:
        signs = SignParams(pole_classes=frozenset(class_map.get("pole", ())), **section("signs"))
    except (TypeError, ValueError) as exc:
        problems.append(f"params.signs: {exc}")

    extent_from_box = params.get("extent_from_box", True)
    if not isinstance(extent_from_box, bool):
        problems.append("params.extent_from_box must be a boolean")

    # clock
    clock = None
    clk = doc.get("clock") or {}
    try:
        clock = FrameClock(float(clk.get("fps", 1.0)), float(clk.get("t0", 0.0)))
    except (TypeError, ValueError) as exc:
        problems.append(f"clock: {exc}")

    # frames
    frames = []
    raw_frames = doc.get("frames")
    if not isinstance(raw_frames, list):
        problems.append("frames missing or not an array")
        raw_frames = []
    seen = set()
    for k, fr in enumerate(raw_frames):
        if not isinstance(fr, dict):
            problems.append(f"frames[{k}] is not an object")
            continue
        fid = fr.get("frame_id")
        if not isinstance(fid, int) or isinstance(fid, bool) or fid < 0:
            problems.append(f"frames[{k}].frame_id must be a non-negative integer")
            continue
        if fid in seen:
            problems.append(f"duplicate frame_id {fid}")
        seen.add(fid)
        paths = {}
        for key in ("image_path", "mask_path", "detections_path"):
            val = fr.get(key)
            if val is None:
                if key != "detections_path":
                    problems.append(f"frames[{k}].{key} missing")
                paths[key] = None
                continue
            p = resolve(val)
            if not p.is_file():
                problems.append(f"frame {fid}: {key} does not exist: {p}")
            paths[key] = p
        frames.append(FrameSpec(fid, paths["image_path"], paths["mask_path"], paths["detections_path"]))

    track_path = resolve(doc.get("track_path"))
    if track_path is not None and not track_path.is_file():
        problems.append(f"track_path does not exist: {track_path}")
    ref_dir = resolve(doc.get("reference_dir"))
    if ref_dir is not None and not ref_dir.is_dir():
        problems.append(f"reference_dir does not exist: {ref_dir}")

    if problems:
        return None, problems
    config = SceneConfig(class_map, marking, barrier, signs, extent_from_box)
    return Scene(root, frames, config, clock, track_path, ref_dir), []


def validate(manifest_path: str | os.PathLike) -> list[str]:
    """Problems found in a manifest; an empty list means it is usable."""
    path = Path(manifest_path)
    doc, problems = _read_manifest(path)
    if doc is None:
        return problems
    return _build(doc, path.parent)[1]


def load_scene(manifest_path: str | os.PathLike) -> Scene:
    path = Path(manifest_path)
    doc, problems = _read_manifest(path)
    if doc is None:
        raise ManifestInvalid(problems)
    scene, problems = _build(doc, path.parent)
    if problems:
        raise ManifestInvalid(problems)
    return scene


# ---------------------------------------------------------------- frames


def _bbox_list(b) -> list:
    return [float(v) for v in b]


def analyze_frame(job: FrameSpec, config: SceneConfig, debug_dir: str | None = None) -> FrameResult:
    """All analyzers on one frame. Exceptions propagate to the caller."""
    res = FrameResult(job.frame_id)
    gray = to_gray(load_image(job.image_path))
    mask = load_mask(job.mask_path)
    if gray.shape != mask.shape:
        raise ValueError(f"image {gray.shape} and mask {mask.shape} differ in size")
    detections = read_detections(job.detections_path) if job.detections_path else []

    for det in detections:
        if det.frame_id != job.frame_id:
            res.diagnostics["foreign_detections"] += 1
            continue
        dtype = config.road_damage_type(det.class_id)
        if dtype is not None:
            res.findings.append(
                Finding(
                    job.frame_id,
                    "road_damage",
                    extent=det.area if config.extent_from_box else None,
                    score=det.score,
                    detail={"bbox": _bbox_list((det.x, det.y, det.w, det.h)), "class_id": det.class_id},
                    damage_type=dtype,
                )
            )
        elif det.class_id in config.sign_classes:
            lib = config.library if config.library is not None else ReferenceLibrary({})
            cond = classify_sign(det, gray, mask, lib, config.signs)
            for note in cond.notes:
                res.diagnostics[f"sign_{note}"] += 1
            if cond.notes:
                res.diagnostics["skipped_signs"] += 1
            base = {"bbox": _bbox_list((det.x, det.y, det.w, det.h)), "class_id": det.class_id}
            if cond.damaged:
                res.findings.append(
                    Finding(job.frame_id, "sign_damaged", score=det.score, detail={**base, "similarity": cond.similarity})
                )
            if cond.skewed:
                res.findings.append(
                    Finding(job.frame_id, "sign_skewed", score=det.score, detail={**base, "skew_deg": cond.skew_deg})
                )
        else:
            res.diagnostics["unmapped_detections"] += 1

    analysis = analyze_marking(gray, mask, config.marking)
    for region in analysis.regions:
        res.findings.append(
            Finding(
                job.frame_id,
                "marking_damage",
                extent=float(region.area),
                detail={"bbox": list(region.bbox), "mean_density": region.mean_density},
            )
        )

    tally: Counter = Counter()
    for a in assess_barriers(mask, gray.shape[1], config.barrier, tally):
        if not a.safe:
            res.findings.append(
                Finding(
                    job.frame_id,
                    "barrier_unsafe",
                    extent=a.area,
                    detail={"bbox": list(a.bbox), "side": a.side, "solidity": a.solidity},
                )
            )
    res.diagnostics["dropped_contours"] += tally["degenerate_hull"]

    if debug_dir:
        out = Path(debug_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"frame{job.frame_id:06d}"
        save_image(out / f"{stem}_refined.pgm", analysis.refined * 255)
        save_image(out / f"{stem}_hot.pgm", analysis.hot * 255)
        save_image(out / f"{stem}_flagged.pgm", analysis.flagged * 255)
    return res


def _safe_analyze(args) -> FrameResult:
    job, config, debug_dir = args
    try:
        return analyze_frame(job, config, debug_dir)
    except Exception as exc:  # fail-soft: one bad frame must not sink the run
        log.warning("frame %s failed: %s", job.frame_id, exc)
        return FrameResult(job.frame_id, error=f"{type(exc).__name__}: {exc}")


# ------------------------------------------------------------------- run


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def unlocated_path(output_path: Path) -> Path:
    return output_path.with_name(output_path.stem + ".unlocated.json")


def run(
    manifest_path: str | os.PathLike,
    output_path: str | os.PathLike,
    *,
    debug_dir: str | os.PathLike | None = None,
    jobs: int = 1,
) -> RunSummary:
    """Analyze every frame of a scene and write the GeoJSON damage map.

    Without a GPS track the GeoJSON holds no features and the findings are
    written to ``<output stem>.unlocated.json`` instead.
    """
    scene = load_scene(manifest_path)
    config = scene.config
    diag: dict = {"frame_errors": []}
    if scene.reference_dir is not None:
        try:
            lib = ReferenceLibrary.load(scene.reference_dir)
        except (OSError, ValueError) as exc:
            raise ManifestInvalid([f"reference library unreadable: {exc}"]) from exc
        config = SceneConfig(
            config.class_map, config.marking, config.barrier, config.signs, config.extent_from_box, lib
        )
    track = None
    if scene.track_path is not None:
        try:
            track = load_track(scene.track_path)
        except (OSError, TrackError) as exc:
            raise ManifestInvalid([f"track unreadable: {exc}"]) from exc

    tasks = [(job, config, str(debug_dir) if debug_dir else None) for job in scene.frames]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_analyze, tasks))
    else:
        results = [_safe_analyze(t) for t in tasks]

    findings: list[Finding] = []
    totals: Counter = Counter()
    for r in sorted(results, key=lambda r: r.frame_id):
        findings.extend(r.findings)
        totals.update(r.diagnostics)
        if r.error is not None:
            diag["frame_errors"].append({"frame_id": r.frame_id, "error": r.error})
    for key in ("dropped_contours", "skipped_signs"):
        diag[key] = totals.pop(key, 0)
    diag.update(sorted(totals.items()))

    output_path = Path(output_path)
    if track is not None:
        _write(output_path, to_geojson(geolocate(findings, track, scene.clock)))
    else:
        _write(output_path, to_geojson([]))
        _write(unlocated_path(output_path), findings_table(findings))

    counts = {k: 0 for k in FINDING_KINDS}
    for f in findings:
        counts[f.kind] += 1
    return RunSummary(counts, len(results), diag)

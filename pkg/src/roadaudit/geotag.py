"""GPS track parsing and per-frame position interpolation."""
from __future__ import annotations

import csv
import io
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .report import GeoFinding


class TrackError(ValueError):
    pass


class EmptyTrack(TrackError):
    pass


class NonMonotoneTimestamps(TrackError):
    pass


class OutOfRangeCoordinate(TrackError):
    pass


class MalformedRow(TrackError):
    pass


@dataclass(frozen=True)
class GpsFix:
    t: float
    lat: float
    lon: float


@dataclass(frozen=True)
class FrameClock:
    fps: float
    t0: float = 0.0

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    def time_of(self, frame_id: int) -> float:
        return self.t0 + frame_id / self.fps


class GpsTrack:
    """Time-sorted WGS84 fixes. Linear interpolation, clamped at both ends."""

    def __init__(self, fixes: Iterable[GpsFix]):
        fixes = tuple(fixes)
        if not fixes:
            raise EmptyTrack("track has no fixes")
        for k, f in enumerate(fixes):
            if not (-90.0 <= f.lat <= 90.0 and -180.0 <= f.lon <= 180.0):
                raise OutOfRangeCoordinate(f"fix {k} at ({f.lat}, {f.lon}) is outside WGS84 range")
            if k and not f.t > fixes[k - 1].t:
                raise NonMonotoneTimestamps(f"timestamp {f.t} does not increase after {fixes[k - 1].t}")
        self.fixes = fixes
        self._times = [f.t for f in fixes]

    def __len__(self) -> int:
        return len(self.fixes)

    def interpolate(self, t: float) -> tuple[float, float]:
        fixes = self.fixes
        if t <= fixes[0].t:
            return fixes[0].lat, fixes[0].lon
        if t >= fixes[-1].t:
            return fixes[-1].lat, fixes[-1].lon
        k = bisect_right(self._times, t)
        a, b = fixes[k - 1], fixes[k]
        if t == a.t:
            return a.lat, a.lon
        w = (t - a.t) / (b.t - a.t)
        return a.lat + w * (b.lat - a.lat), a.lon + w * (b.lon - a.lon)


def parse_track(text: str) -> GpsTrack:
    """Parse ``t,lat,lon`` CSV text (header required). Rows must be time-sorted."""
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyTrack("track file is empty")
    header = [c.strip().lower() for c in rows[0]]
    if header != ["t", "lat", "lon"]:
        raise MalformedRow(f"expected header 't,lat,lon', got {','.join(rows[0])!r}")
    fixes = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise MalformedRow(f"line {line_no}: expected 3 fields, got {len(row)}")
        try:
            t, lat, lon = (float(c) for c in row)
        except ValueError as exc:
            raise MalformedRow(f"line {line_no}: {exc}") from exc
        if not all(np.isfinite((t, lat, lon))):
            raise MalformedRow(f"line {line_no}: non-finite value")
        fixes.append(GpsFix(t, lat, lon))
    return GpsTrack(fixes)


def load_track(path) -> GpsTrack:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_track(fh.read())


def interpolate(track: GpsTrack, t: float) -> tuple[float, float]:
    return track.interpolate(t)


def geolocate(findings, track: GpsTrack, clock: FrameClock) -> list:
    """Attach the interpolated position of each finding's frame."""
    out = []
    for f in findings:
        lat, lon = track.interpolate(clock.time_of(f.frame_id))
        out.append(GeoFinding(f, lat, lon))
    return out

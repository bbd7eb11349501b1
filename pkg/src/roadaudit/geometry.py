"""Discrete geometry: border following, convex hulls, areas, oriented boxes.

Coordinates are image coordinates, ``x`` = column and ``y`` = row (growing
downward). Counter-clockwise means positive signed shoelace area under the
mapping ``(x, y) -> (x, -y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_binary

DEGENERATE_EXTENT = 1e-6


class EmptyInput(ValueError):
    pass


class Degenerate(ValueError):
    pass


class DegenerateHull(Degenerate):
    pass


@dataclass
class Contour:
    points: np.ndarray  # (n, 2) int, columns x, y
    hole: bool = False

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RotatedRect:
    center: tuple[float, float]
    size: tuple[float, float]  # (w, h), w >= h
    angle: float  # degrees in [-90, 90), direction of the w side

    @property
    def area(self) -> float:
        return self.size[0] * self.size[1]

    def corners(self) -> np.ndarray:
        """Corner points in order, as a (4, 2) float array."""
        a = math.radians(self.angle)
        u = np.array([math.cos(a), math.sin(a)])
        v = np.array([-math.sin(a), math.cos(a)])
        c = np.asarray(self.center, dtype=np.float64)
        hw, hh = self.size[0] / 2.0, self.size[1] / 2.0
        return np.array(
            [c - hw * u - hh * v, c + hw * u - hh * v, c + hw * u + hh * v, c - hw * u + hh * v]
        )


# -------------------------------------------------------- border following

# Neighbour offsets (drow, dcol), clockwise on screen starting east.
_DIRS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
_DIR_INDEX = {d: k for k, d in enumerate(_DIRS)}


def trace_contours(mask: np.ndarray, *, include_holes: bool = False) -> list[Contour]:
    """Suzuki-Abe border following on an 8-connected foreground.

    Returns the outer border of every connected component in raster order of
    their starting pixel. Hole borders are traced as well (they are needed to
    keep the labelling consistent) and only returned with ``include_holes``.
    """
    m = check_binary(mask)
    h, w = m.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int32)
    f[1:-1, 1:-1] = m
    nz = f != 0
    # Zero pixels never change, so the start candidates are fixed up front.
    left_zero = np.zeros_like(nz)
    left_zero[:, 1:] = ~nz[:, :-1]
    right_zero = np.zeros_like(nz)
    right_zero[:, :-1] = ~nz[:, 1:]
    cand = np.argwhere(nz & (left_zero | right_zero))

    contours: list[Contour] = []
    nbd = 1
    for i, j in cand:
        i = int(i)
        j = int(j)
        if f[i, j] == 1 and f[i, j - 1] == 0:
            hole = False
            i2, j2 = i, j - 1
        elif f[i, j] >= 1 and f[i, j + 1] == 0:
            hole = True
            i2, j2 = i, j + 1
        else:
            continue
        nbd += 1
        pts = _follow(f, i, j, i2, j2, nbd)
        if not hole or include_holes:
            arr = np.array([(c - 1, r - 1) for r, c in pts], dtype=np.int64)
            contours.append(Contour(arr, hole))
    return contours


def _follow(f: np.ndarray, i: int, j: int, i2: int, j2: int, nbd: int) -> list[tuple[int, int]]:
    start = _DIR_INDEX[(i2 - i, j2 - j)]
    # Clockwise search for the first nonzero neighbour.
    for step in range(8):
        d = (start + step) % 8
        di, dj = _DIRS[d]
        if f[i + di, j + dj] != 0:
            i1, j1 = i + di, j + dj
            break
    else:
        f[i, j] = -nbd
        return [(i, j)]

    pts = []
    i2, j2 = i1, j1
    i3, j3 = i, j
    while True:
        pts.append((i3, j3))
        # Counter-clockwise search starting after (i2, j2).
        d0 = _DIR_INDEX[(i2 - i3, j2 - j3)]
        east_zero = False
        for step in range(1, 9):
            d = (d0 - step) % 8
            di, dj = _DIRS[d]
            if f[i3 + di, j3 + dj] != 0:
                i4, j4 = i3 + di, j3 + dj
                break
            if d == 0:
                east_zero = True
        if east_zero:
            f[i3, j3] = -nbd
        elif f[i3, j3] == 1:
            f[i3, j3] = nbd
        if (i4, j4) == (i, j) and (i3, j3) == (i1, j1):
            break
        i2, j2 = i3, j3
        i3, j3 = i4, j4
    return pts


# ------------------------------------------------------------------ hulls


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Convex hull vertices, counter-clockwise, collinear points dropped.

    Monotone-chain scan on the point set. Works in the flipped frame
    ``(x, -y)`` so that the result is counter-clockwise by the convention
    above. Fewer than three distinct non-collinear points give the one or
    two extreme points.
    """
    pts = np.asarray(points)
    if pts.size == 0:
        raise EmptyInput("convex_hull needs at least one point")
    pts = pts.reshape(-1, 2)
    flipped = sorted({(p[0], -p[1]) for p in pts.tolist()})
    if len(flipped) <= 2:
        hull = flipped
    else:
        lower: list = []
        for p in flipped:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        upper: list = []
        for p in reversed(flipped):
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
                upper.pop()
            upper.append(p)
        hull = lower[:-1] + upper[:-1]
    out = np.array([(x, -y) for x, y in hull], dtype=pts.dtype)
    return out + 0  # turn any -0.0 into 0.0


def signed_area(poly) -> float:
    """Shoelace area in the flipped frame: positive for counter-clockwise."""
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], -p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    p = np.asarray(poly).reshape(-1, 2)
    if len(p) < 3:
        raise Degenerate(f"polygon needs at least 3 vertices, got {len(p)}")
    return abs(signed_area(p))


def contour_area(contour: Contour | np.ndarray) -> float:
    """Shoelace area enclosed by the boundary chain through pixel centres."""
    pts = contour.points if isinstance(contour, Contour) else np.asarray(contour)
    if len(pts) < 3:
        return 0.0
    return abs(signed_area(pts))


def solidity(contour: Contour | np.ndarray) -> float:
    """Contour area divided by the area of its convex hull, in [0, 1]."""
    pts = contour.points if isinstance(contour, Contour) else np.asarray(contour)
    if len(pts) == 0:
        raise DegenerateHull("empty contour")
    hull = convex_hull(pts)
    hull_area = abs(signed_area(hull)) if len(hull) >= 3 else 0.0
    if hull_area <= 0.0:
        raise DegenerateHull("convex hull has zero area")
    return min(1.0, max(0.0, contour_area(pts) / hull_area))


def point_in_convex(hull: np.ndarray, p) -> bool:
    """Exact inside-or-on test for a counter-clockwise convex polygon."""
    n = len(hull)
    for k in range(n):
        a = (hull[k][0], -hull[k][1])
        b = (hull[(k + 1) % n][0], -hull[(k + 1) % n][1])
        if _cross(a, b, (p[0], -p[1])) < 0:
            return False
    return True


# ----------------------------------------------------- minimum-area rectangle


def _fold_angle(deg: float) -> float:
    """Map a line direction in degrees to [-90, 90)."""
    a = math.fmod(deg + 90.0, 180.0)
    if a < 0:
        a += 180.0
    a -= 90.0
    if a >= 90.0 - 1e-12:
        a = -90.0
    return a


def min_area_rect(points) -> RotatedRect:
    """Minimum-area enclosing rectangle by rotating calipers on the hull.

    Every hull edge direction is tried; for each, the hull is projected onto
    the edge and its normal to get the bounding extents. Equal areas resolve
    to the smallest reported angle. Collinear input yields a rectangle of
    height ``DEGENERATE_EXTENT`` along the segment.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise EmptyInput("min_area_rect needs at least one point")
    pts = pts.reshape(-1, 2)
    hull = convex_hull(pts).astype(np.float64)
    eps = DEGENERATE_EXTENT
    if len(hull) == 1:
        return RotatedRect((float(hull[0, 0]), float(hull[0, 1])), (eps, eps), 0.0)
    if len(hull) == 2:
        d = hull[1] - hull[0]
        c = hull.mean(axis=0)
        length = float(math.hypot(d[0], d[1]))
        ang = _fold_angle(math.degrees(math.atan2(d[1], d[0])))
        return RotatedRect((float(c[0]), float(c[1])), (max(length, eps), eps), ang)

    best = None
    n = len(hull)
    for k in range(n):
        e = hull[(k + 1) % n] - hull[k]
        norm = math.hypot(e[0], e[1])
        if norm == 0.0:
            continue
        u = e / norm
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        lu, hu_ = float(pu.min()), float(pu.max())
        lv, hv = float(pv.min()), float(pv.max())
        wu, wv = hu_ - lu, hv - lv
        area = wu * wv
        center = u * (lu + hu_) / 2.0 + v * (lv + hv) / 2.0
        if wu >= wv:
            w_, h_, axis = wu, wv, u
        else:
            w_, h_, axis = wv, wu, v
        ang = _fold_angle(math.degrees(math.atan2(axis[1], axis[0])))
        cand = (area, ang, w_, h_, center)
        if best is None:
            best = cand
            continue
        tol = 1e-9 * max(1.0, best[0])
        if area < best[0] - tol or (abs(area - best[0]) <= tol and ang < best[1]):
            best = cand
    area, ang, w_, h_, center = best
    if h_ <= 0.0:
        h_ = eps
    return RotatedRect((float(center[0]), float(center[1])), (float(w_), float(h_)), float(ang))

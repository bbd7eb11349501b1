"""Guardrail safety from segmentation masks via contour solidity."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_gray
from .geometry import DegenerateHull, contour_area, solidity, trace_contours
from .raster import extract_class_mask


@dataclass(frozen=True)
class BarrierParams:
    barrier_classes: frozenset = frozenset()
    right_threshold: float = 0.8
    left_threshold: float = 0.6
    min_area: float = 400.0
    strict: bool = True  # safe iff solidity > threshold; False uses >=

    def __post_init__(self):
        object.__setattr__(self, "barrier_classes", frozenset(int(c) for c in self.barrier_classes))
        for name in ("right_threshold", "left_threshold"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.min_area < 0:
            raise ValueError(f"min_area must be >= 0, got {self.min_area}")

    def threshold(self, side: str) -> float:
        return self.left_threshold if side == "left" else self.right_threshold

    def is_safe(self, side: str, value: float) -> bool:
        t = self.threshold(side)
        return value > t if self.strict else value >= t


@dataclass
class BarrierAssessment:
    side: str  # "left" | "right"
    solidity: float
    safe: bool
    area: float
    bbox: tuple[int, int, int, int]  # x, y, w, h


def _centroid_x(points: np.ndarray, area: float) -> float:
    """Polygon centroid x for a closed chain with nonzero area."""
    x = points[:, 0].astype(np.float64)
    y = points[:, 1].astype(np.float64)
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    signed = 0.5 * cross.sum()
    return float(((x + xn) * cross).sum() / (6.0 * signed))


def assess_barriers(
    mask: np.ndarray,
    frame_width: int | None,
    p: BarrierParams,
    diagnostics: Counter | None = None,
) -> list[BarrierAssessment]:
    """Classify each barrier contour as safe or unsafe.

    Contours under ``min_area`` are dropped. A contour is on the left when its
    centroid lies left of the frame midline. Contours with a zero-area hull
    are skipped and tallied under ``degenerate_hull`` in ``diagnostics``.
    """
    mask = check_gray(mask, "class mask")
    if frame_width is None:
        frame_width = mask.shape[1]
    binary = extract_class_mask(mask, p.barrier_classes)
    out = []
    for c in trace_contours(binary):
        area = contour_area(c)
        if area < p.min_area or area == 0.0:
            continue
        try:
            value = solidity(c)
        except DegenerateHull:
            if diagnostics is not None:
                diagnostics["degenerate_hull"] += 1
            continue
        # Midline in pixel-centre coordinates.
        side = "left" if _centroid_x(c.points, area) < (frame_width - 1) / 2.0 else "right"
        xs, ys = c.points[:, 0], c.points[:, 1]
        out.append(
            BarrierAssessment(
                side=side,
                solidity=value,
                safe=p.is_safe(side, value),
                area=area,
                bbox=(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)),
            )
        )
    return out


class BarrierAssessor(BaseEstimator):
    """Estimator front-end: ``predict`` maps class masks to assessments."""

    def __init__(self, barrier_classes=(), right_threshold=0.8, left_threshold=0.6, min_area=400.0, strict=True):
        self.barrier_classes = barrier_classes
        self.right_threshold = right_threshold
        self.left_threshold = left_threshold
        self.min_area = min_area
        self.strict = strict

    def _params(self) -> BarrierParams:
        return BarrierParams(
            frozenset(self.barrier_classes), self.right_threshold, self.left_threshold, self.min_area, self.strict
        )

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        return self

    def predict(self, X):
        params = getattr(self, "params_", None) or self._params()
        return [assess_barriers(m, None, params) for m in X]

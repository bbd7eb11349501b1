"""Road-marking damage: refine the marking mask, score texture, measure density.

The chain is

1. marking-class pixels that also pass an adaptive intensity threshold
   (``refine_marking_mask``);
2. derivative filter-bank response on marking-class pixels whose 3x3 stencil
   lies inside the marking class, binarized at Otsu's split ("hot" pixels).
   The eroded class mask is used rather than the refined mask, because paint
   loss is exactly what the refine step removes;
3. SLIC superpixels over the refined region's padded bounding box, computed
   on a box-smoothed copy so fine texture does not shatter the superpixels;
4. superpixels whose hot density exceeds ``density_threshold`` and that touch
   the refined mask are flagged, then 4-adjacent flagged superpixels are
   merged into damage regions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator

from ._validation import DimensionMismatch, check_gray, check_odd, check_unit_interval
from .raster import (
    adaptive_threshold,
    binary_erode,
    extract_class_mask,
    filter_bank_response,
    local_mean,
    otsu_threshold,
)
from .superpixel import SlicParams, slic, superpixel_density

ROI_PAD = 8
UNIMODAL_MASS = 0.05
FALLBACK_FRACTION = 0.1


@dataclass(frozen=True)
class MarkingParams:
    marking_classes: frozenset = frozenset()
    threshold_window: int = 15
    threshold_offset: float = -10.0
    density_threshold: float = 0.3
    slic: SlicParams | None = None
    superpixel_area: int = 400  # used to derive k when ``slic`` is None
    smooth_window: int = 5  # box mean applied to the SLIC input; 1 disables

    def __post_init__(self):
        object.__setattr__(self, "marking_classes", frozenset(int(c) for c in self.marking_classes))
        check_odd(self.threshold_window, "threshold_window")
        check_unit_interval(self.density_threshold, "density_threshold")
        check_odd(self.smooth_window, "smooth_window")
        if self.superpixel_area < 1:
            raise ValueError(f"superpixel_area must be >= 1, got {self.superpixel_area}")

    def slic_for(self, roi_pixels: int) -> SlicParams:
        if self.slic is not None:
            if self.slic.k > roi_pixels:
                return SlicParams(roi_pixels, self.slic.compactness, self.slic.iterations, self.slic.min_region)
            return self.slic
        return SlicParams(k=max(1, round(roi_pixels / self.superpixel_area)))


@dataclass
class MarkingDamageRegion:
    superpixels: frozenset  # ids in the ROI labeling
    area: int
    mean_density: float
    bbox: tuple[int, int, int, int]  # x, y, w, h in frame pixels

    @property
    def extent(self) -> int:
        return self.area


@dataclass
class MarkingAnalysis:
    """Everything the pipeline computed for one frame, for debugging dumps."""

    refined: np.ndarray
    hot: np.ndarray
    flagged: np.ndarray
    regions: list[MarkingDamageRegion] = field(default_factory=list)
    roi: tuple[int, int, int, int] | None = None  # y0, y1, x0, x1
    labels: np.ndarray | None = None


def refine_marking_mask(gray: np.ndarray, mask: np.ndarray, p: MarkingParams) -> np.ndarray:
    gray = check_gray(gray)
    mask = check_gray(mask, "class mask")
    if gray.shape != mask.shape:
        raise DimensionMismatch(f"image {gray.shape} vs mask {mask.shape}")
    selected = extract_class_mask(mask, p.marking_classes)
    if not selected.any():
        return selected
    return selected & adaptive_threshold(gray, p.threshold_window, p.threshold_offset)


def hot_mask(response: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Binarize ``response`` over ``support`` at the Otsu split.

    Falls back to ``response > 0.1 * max`` when the Otsu class above the split
    holds less than 5% of the support.
    """
    sel = support.astype(bool)
    hot = np.zeros(response.shape, dtype=np.uint8)
    if not sel.any():
        return hot
    vals = response[sel]
    peak = vals.max()
    if peak <= 0:
        return hot
    t = otsu_threshold(vals)
    if np.count_nonzero(vals > t) < UNIMODAL_MASS * vals.size:
        t = FALLBACK_FRACTION * peak
    hot[sel] = response[sel] > t
    return hot


def _roi(refined: np.ndarray) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(refined)
    h, w = refined.shape
    return (
        max(0, int(ys.min()) - ROI_PAD),
        min(h, int(ys.max()) + ROI_PAD + 1),
        max(0, int(xs.min()) - ROI_PAD),
        min(w, int(xs.max()) + ROI_PAD + 1),
    )


def _merge_flagged(labels: np.ndarray, flagged_ids: np.ndarray) -> list[list[int]]:
    """Group flagged superpixel ids into 4-adjacent clusters."""
    if flagged_ids.size == 0:
        return []
    is_flag = np.zeros(int(labels.max()) + 1, dtype=bool)
    is_flag[flagged_ids] = True
    pairs = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        sel = (a != b) & is_flag[a] & is_flag[b]
        pairs.append(np.stack([a[sel], b[sel]], axis=1))
    pairs = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    n = is_flag.size
    graph = coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for sid in sorted(flagged_ids.tolist()):
        groups.setdefault(int(comp[sid]), []).append(sid)
    return list(groups.values())


def analyze_marking(gray: np.ndarray, mask: np.ndarray, p: MarkingParams) -> MarkingAnalysis:
    """Run the full marking chain and keep the intermediate masks."""
    gray = check_gray(gray)
    refined = refine_marking_mask(gray, mask, p)
    empty = np.zeros_like(refined)
    if not refined.any():
        return MarkingAnalysis(refined, empty, empty.copy())

    interior = binary_erode(extract_class_mask(mask, p.marking_classes))
    hot = hot_mask(filter_bank_response(gray), interior)
    if not hot.any():
        return MarkingAnalysis(refined, hot, empty.copy())

    y0, y1, x0, x1 = _roi(refined)
    roi_gray = gray[y0:y1, x0:x1]
    if p.smooth_window > 1:
        roi_gray = np.floor(local_mean(roi_gray, p.smooth_window) + 0.5).astype(np.uint8)
    lab = slic(roi_gray, p.slic_for(roi_gray.size))
    dens = superpixel_density(lab, hot[y0:y1, x0:x1])
    on_marking = np.bincount(lab.labels.ravel(), weights=refined[y0:y1, x0:x1].ravel(), minlength=lab.count) > 0
    flagged_ids = np.nonzero((dens > p.density_threshold) & on_marking)[0]

    sizes = lab.sizes()
    hits = dens * sizes
    regions = []
    for group in _merge_flagged(lab.labels, flagged_ids):
        sel = np.isin(lab.labels, group)
        ys, xs = np.nonzero(sel)
        area = int(sizes[group].sum())
        regions.append(
            MarkingDamageRegion(
                superpixels=frozenset(group),
                area=area,
                mean_density=float(hits[group].sum() / area),
                bbox=(
                    int(xs.min()) + x0,
                    int(ys.min()) + y0,
                    int(xs.max() - xs.min() + 1),
                    int(ys.max() - ys.min() + 1),
                ),
            )
        )
    regions.sort(key=lambda r: (r.bbox[1], r.bbox[0]))

    flagged = empty.copy()
    flagged[y0:y1, x0:x1] = np.isin(lab.labels, flagged_ids)
    return MarkingAnalysis(refined, hot, flagged, regions, (y0, y1, x0, x1), lab.labels)


def marking_damage(gray: np.ndarray, mask: np.ndarray, p: MarkingParams) -> list[MarkingDamageRegion]:
    return analyze_marking(gray, mask, p).regions


def region_extent(r: MarkingDamageRegion) -> int:
    return r.area


class MarkingDamageDetector(BaseEstimator):
    """Estimator front-end for the marking chain.

    ``predict`` takes a sequence of ``(gray, class_mask)`` pairs, one per
    frame, and returns one list of :class:`MarkingDamageRegion` per frame.
    """

    def __init__(
        self,
        marking_classes=(),
        threshold_window=15,
        threshold_offset=-10.0,
        density_threshold=0.3,
        superpixel_area=400,
        smooth_window=5,
        slic_params=None,
    ):
        self.marking_classes = marking_classes
        self.threshold_window = threshold_window
        self.threshold_offset = threshold_offset
        self.density_threshold = density_threshold
        self.superpixel_area = superpixel_area
        self.smooth_window = smooth_window
        self.slic_params = slic_params

    def _params(self) -> MarkingParams:
        return MarkingParams(
            marking_classes=frozenset(self.marking_classes),
            threshold_window=self.threshold_window,
            threshold_offset=self.threshold_offset,
            density_threshold=self.density_threshold,
            slic=self.slic_params,
            superpixel_area=self.superpixel_area,
            smooth_window=self.smooth_window,
        )

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        return self

    def predict(self, X):
        params = getattr(self, "params_", None) or self._params()
        return [marking_damage(gray, mask, params) for gray, mask in X]

"""Traffic-sign condition: reference similarity and pole skew."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_gray
from .geometry import min_area_rect
from .raster import load_image, to_gray

CROP_SIZE = 64
MIN_STD = 1e-6
# Pole fragments below this share of the largest fragment are ignored.
POLE_FRAGMENT_SHARE = 0.1


class EmptyRegion(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class NoPole(ValueError):
    pass


class UnknownClass(KeyError):
    pass


@dataclass(frozen=True)
class DetectionBox:
    frame_id: int
    class_id: int
    x: float
    y: float
    w: float
    h: float
    score: float = 1.0

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive size, got {self.w}x{self.h}")

    @classmethod
    def from_record(cls, rec: dict) -> DetectionBox:
        return cls(
            int(rec["frame_id"]),
            int(rec["class_id"]),
            float(rec["x"]),
            float(rec["y"]),
            float(rec["w"]),
            float(rec["h"]),
            float(rec.get("score", 1.0)),
        )

    def to_record(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "class_id": self.class_id,
            "x": self.x,
            "y": self.y,
            "w": self.w,
            "h": self.h,
            "score": self.score,
        }

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def centroid(self) -> tuple[float, float]:
        """Centre in pixel-centre coordinates."""
        return (self.x + (self.w - 1) / 2.0, self.y + (self.h - 1) / 2.0)


@dataclass(frozen=True)
class SignParams:
    sim_threshold: float = 0.6
    skew_threshold: float = 10.0
    pole_classes: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "pole_classes", frozenset(int(c) for c in self.pole_classes))
        if not -1.0 <= self.sim_threshold <= 1.0:
            raise ValueError(f"sim_threshold must lie in [-1, 1], got {self.sim_threshold}")
        if not 0.0 <= self.skew_threshold <= 90.0:
            raise ValueError(f"skew_threshold must lie in [0, 90], got {self.skew_threshold}")


@dataclass
class SignCondition:
    status: str  # ok | damaged | skewed | damaged_and_skewed
    similarity: float | None
    skew_deg: float | None
    notes: tuple[str, ...] = ()

    @property
    def damaged(self) -> bool:
        return self.status in ("damaged", "damaged_and_skewed")

    @property
    def skewed(self) -> bool:
        return self.status in ("skewed", "damaged_and_skewed")


# ------------------------------------------------------------- similarity


def resample_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel centres aligned (``src = (i + .5) s - .5``)."""
    src = np.asarray(img, dtype=np.float64)
    h, w = src.shape

    def axis(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


def normalize_crop(region: np.ndarray) -> np.ndarray:
    """Resample to 64x64 and standardize to zero mean, unit variance."""
    arr = np.asarray(region)
    if arr.ndim != 2 or arr.size == 0:
        raise EmptyRegion("crop is empty")
    crop = resample_bilinear(arr, CROP_SIZE, CROP_SIZE)
    crop -= crop.mean()
    sd = crop.std()
    if sd < MIN_STD:
        raise ZeroVariance("crop has no intensity variation")
    return crop / sd


def sign_similarity(crop: np.ndarray, reference: np.ndarray) -> float:
    """Normalized cross-correlation of two standardized crops."""
    a = np.asarray(crop, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"crop shapes differ: {a.shape} vs {b.shape}")
    return float(np.clip(np.mean(a * b), -1.0, 1.0))


def crop_box(frame: np.ndarray, box: DetectionBox) -> np.ndarray:
    h, w = frame.shape[:2]
    x0 = max(0, int(math.floor(box.x)))
    y0 = max(0, int(math.floor(box.y)))
    x1 = min(w, int(math.ceil(box.x + box.w)))
    y1 = min(h, int(math.ceil(box.y + box.h)))
    if x1 <= x0 or y1 <= y0:
        raise EmptyRegion(f"box {box} lies outside the frame")
    return frame[y0:y1, x0:x1]


class ReferenceLibrary:
    """Standardized reference crops per sign class. Immutable once built."""

    def __init__(self, crops: dict):
        built = {}
        for cls, items in crops.items():
            normed = tuple(normalize_crop(np.asarray(c)) for c in items)
            if not normed:
                raise ValueError(f"class {cls} has no reference crops")
            for c in normed:
                c.setflags(write=False)
            built[int(cls)] = normed
        self._crops = MappingProxyType(built)

    @classmethod
    def load(cls, root: str | os.PathLike) -> ReferenceLibrary:
        """Read ``<root>/<class_id>/<n>.pgm`` files."""
        root = Path(root)
        if not root.is_dir():
            raise FileNotFoundError(f"reference directory {root} not found")
        crops: dict[int, list] = {}
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            try:
                cls_id = int(sub.name)
            except ValueError:
                continue
            files = sorted(sub.glob("*.pgm"), key=lambda p: (len(p.stem), p.stem))
            if files:
                crops[cls_id] = [to_gray(load_image(f)) for f in files]
        return cls(crops)

    def __reduce__(self):
        # Mapping proxies do not pickle; rebuild from the stored crops.
        return (_rebuild_library, (dict(self._crops),))

    def __contains__(self, class_id) -> bool:
        return int(class_id) in self._crops

    def __getitem__(self, class_id) -> tuple:
        try:
            return self._crops[int(class_id)]
        except KeyError:
            raise UnknownClass(class_id) from None

    def classes(self) -> list[int]:
        return sorted(self._crops)

    def similarity(self, class_id, crop: np.ndarray) -> float:
        """Best correlation of an already standardized crop against the class."""
        return max(sign_similarity(crop, ref) for ref in self[class_id])


def _rebuild_library(crops: dict) -> ReferenceLibrary:
    lib = ReferenceLibrary.__new__(ReferenceLibrary)
    for items in crops.values():
        for c in items:
            c.setflags(write=False)
    lib._crops = MappingProxyType(crops)
    return lib


# -------------------------------------------------------------------- skew


def _pick_pole(binary: np.ndarray, sign_centroid) -> np.ndarray:
    labels, n = ndimage.label(binary, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        raise NoPole("no pole pixels")
    idx = np.arange(1, n + 1)
    sizes = ndimage.sum_labels(binary, labels, idx)
    keep = sizes >= POLE_FRAGMENT_SHARE * sizes.max()
    sx, sy = sign_centroid
    best = None
    for lab, size, ok, sl in zip(idx, sizes, keep, ndimage.find_objects(labels)):
        if not ok:
            continue
        cy = (sl[0].start + sl[0].stop - 1) / 2.0
        cx = (sl[1].start + sl[1].stop - 1) / 2.0
        key = (math.hypot(cx - sx, cy - sy), -size, lab)
        if best is None or key < best[0]:
            best = (key, lab)
    ys, xs = np.nonzero(labels == best[1])
    return np.stack([xs, ys], axis=1)


def skew_from_rect(rect, sign_centroid) -> float:
    """Angle to the vertical of the line joining the rectangle edge midpoints
    nearest to and furthest from the sign, folded into [0, 90)."""
    corners = rect.corners()
    mids = (corners + np.roll(corners, -1, axis=0)) / 2.0
    d = np.hypot(mids[:, 0] - sign_centroid[0], mids[:, 1] - sign_centroid[1])
    near = mids[int(np.argmin(d))]
    far = mids[int(np.argmax(d))]
    dx, dy = far - near
    theta = math.degrees(math.atan2(abs(dx), abs(dy)))
    theta = math.fmod(theta, 90.0)
    return 0.0 if theta < 1e-9 else theta


def pole_skew(mask: np.ndarray, pole_class, sign_centroid) -> float:
    """Tilt of the sign's pole from the image vertical, in degrees.

    ``pole_class`` is one class id or a collection of them. The pole is the
    8-connected pole component whose bounding-box centre is nearest to the
    sign centroid (fragments under a tenth of the largest one ignored).
    """
    mask = check_gray(mask, "class mask")
    classes = [pole_class] if np.isscalar(pole_class) else list(pole_class)
    binary = np.isin(mask, np.asarray(classes, dtype=np.int64))
    if not binary.any():
        raise NoPole("no pole pixels")
    pts = _pick_pole(binary, sign_centroid)
    rect = min_area_rect(pts)
    return skew_from_rect(rect, sign_centroid)


# -------------------------------------------------------------- decision


def _status(damaged: bool, skewed: bool) -> str:
    if damaged and skewed:
        return "damaged_and_skewed"
    if damaged:
        return "damaged"
    if skewed:
        return "skewed"
    return "ok"


def classify_sign(
    box: DetectionBox,
    frame: np.ndarray,
    mask: np.ndarray | None,
    lib: ReferenceLibrary,
    params: SignParams,
) -> SignCondition:
    """Combine the reference comparison and the skew test for one detection.

    A class missing from ``lib`` skips the similarity test; a frame with no
    pole pixels skips the skew test. Either case is listed in ``notes``.
    A featureless crop counts as similarity 0.
    """
    frame = check_gray(frame, "frame")
    notes = []
    similarity = None
    if box.class_id in lib:
        try:
            similarity = lib.similarity(box.class_id, normalize_crop(crop_box(frame, box)))
        except ZeroVariance:
            similarity = 0.0
            notes.append("zero_variance")
    else:
        notes.append("unknown_class")

    skew = None
    if mask is not None and params.pole_classes:
        try:
            skew = pole_skew(mask, params.pole_classes, box.centroid)
        except NoPole:
            notes.append("no_pole")
    else:
        notes.append("no_pole")

    damaged = similarity is not None and similarity < params.sim_threshold
    skewed = skew is not None and skew >= params.skew_threshold
    return SignCondition(_status(damaged, skewed), similarity, skew, tuple(notes))


class SignConditionClassifier(BaseEstimator):
    """Estimator front-end: ``fit`` builds the reference library.

    ``fit`` accepts either a directory path in the ``<class_id>/<n>.pgm``
    layout or a mapping ``class_id -> list of crops``. ``predict`` takes a
    sequence of ``(box, gray_frame, class_mask)`` triples.
    """

    def __init__(self, sim_threshold=0.6, skew_threshold=10.0, pole_classes=()):
        self.sim_threshold = sim_threshold
        self.skew_threshold = skew_threshold
        self.pole_classes = pole_classes

    def fit(self, X, y=None):
        if isinstance(X, ReferenceLibrary):
            self.library_ = X
        elif isinstance(X, (str, os.PathLike)):
            self.library_ = ReferenceLibrary.load(X)
        else:
            self.library_ = ReferenceLibrary(X)
        self.classes_ = np.array(self.library_.classes())
        return self

    def predict(self, X):
        check_is_fitted(self, "library_")
        params = SignParams(self.sim_threshold, self.skew_threshold, frozenset(self.pole_classes))
        return [classify_sign(box, frame, mask, self.library_, params) for box, frame, mask in X]

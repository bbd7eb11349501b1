"""Grayscale SLIC superpixels and per-superpixel density of a binary map."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import DimensionMismatch, check_binary, check_gray


class KTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SlicParams:
    k: int = 100
    compactness: float = 10.0
    iterations: int = 10
    min_region: int | None = None  # None -> (S/2)^2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.compactness > 0:
            raise ValueError(f"compactness must be > 0, got {self.compactness}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.min_region is not None and self.min_region < 0:
            raise ValueError(f"min_region must be >= 0, got {self.min_region}")


@dataclass
class SuperpixelLabeling:
    labels: np.ndarray  # (H, W) int64, dense ids in [0, count)
    count: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.count)


def _gradient(img: np.ndarray) -> np.ndarray:
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[:, :-1] = img[:, 1:] - img[:, :-1]
    dy[:-1, :] = img[1:, :] - img[:-1, :]
    return dx * dx + dy * dy


def _seed_centers(img: np.ndarray, step: float) -> np.ndarray:
    h, w = img.shape
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    grad = _gradient(img)
    centers = []
    for i in range(ny):
        for j in range(nx):
            # Exact cell centre in pixel coordinates; kept unless a neighbour
            # has a strictly lower gradient.
            fy = (i + 0.5) * h / ny - 0.5
            fx = (j + 0.5) * w / nx - 0.5
            cy = min(h - 1, int(round(fy)))
            cx = min(w - 1, int(round(fx)))
            by, bx = cy, cx
            best = grad[cy, cx]
            for yy in range(max(0, cy - 1), min(h, cy + 2)):
                for xx in range(max(0, cx - 1), min(w, cx + 2)):
                    if grad[yy, xx] < best:
                        best, by, bx = grad[yy, xx], yy, xx
            if (by, bx) == (cy, cx):
                centers.append((img[cy, cx], fy, fx))
            else:
                centers.append((img[by, bx], by, bx))
    return np.array(centers, dtype=np.float64)


def _assign(img, centers, step, m, ys, xs):
    h, w = img.shape
    dist = np.full((h, w), np.inf)
    labels = np.full((h, w), -1, dtype=np.int64)
    reach = int(math.ceil(step))
    scale = (m / step) ** 2
    for idx, (ci, cy, cx) in enumerate(centers):
        y0, y1 = max(0, int(cy) - reach), min(h, int(cy) + reach + 1)
        x0, x1 = max(0, int(cx) - reach), min(w, int(cx) + reach + 1)
        win = img[y0:y1, x0:x1]
        d = (win - ci) ** 2 + ((ys[y0:y1, None] - cy) ** 2 + (xs[None, x0:x1] - cx) ** 2) * scale
        sub = dist[y0:y1, x0:x1]
        better = d < sub
        sub[better] = d[better]
        labels[y0:y1, x0:x1][better] = idx
    missing = labels < 0
    if missing.any():
        py, px = np.nonzero(missing)
        d = (
            (img[py, px][:, None] - centers[None, :, 0]) ** 2
            + ((py[:, None] - centers[None, :, 1]) ** 2 + (px[:, None] - centers[None, :, 2]) ** 2) * scale
        )
        labels[py, px] = np.argmin(d, axis=1)
    return labels


def _update(img, labels, centers, ys, xs):
    n = len(centers)
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    yy = np.broadcast_to(ys[:, None], img.shape).ravel()
    xx = np.broadcast_to(xs[None, :], img.shape).ravel()
    sums = np.stack(
        [
            np.bincount(flat, weights=img.ravel(), minlength=n),
            np.bincount(flat, weights=yy, minlength=n),
            np.bincount(flat, weights=xx, minlength=n),
        ],
        axis=1,
    )
    out = centers.copy()
    nonempty = counts > 0
    out[nonempty] = sums[nonempty] / counts[nonempty, None]
    return out


def _components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected pieces of equal label, as one id per pixel."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    same_h = labels[:, :-1] == labels[:, 1:]
    same_v = labels[:-1, :] == labels[1:, :]
    rows = np.concatenate([idx[:, :-1][same_h], idx[:-1, :][same_v]])
    cols = np.concatenate([idx[:, 1:][same_h], idx[1:, :][same_v]])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(h * w, h * w))
    n, comp = connected_components(graph, directed=False)
    return comp.reshape(h, w).astype(np.int64), n


def _enforce_connectivity(labels: np.ndarray, min_region: int) -> np.ndarray:
    """Split labels into 4-connected pieces and fold small pieces into neighbours.

    Pieces are merged smallest first (ties by raster position of their first
    pixel) into the largest adjacent piece.
    """
    h, w = labels.shape
    comp, n = _components(labels)
    flat = comp.ravel()
    sizes = np.bincount(flat, minlength=n)
    first = np.full(n, h * w, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(h * w))

    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        pairs = np.unique(np.stack([a[diff], b[diff]], axis=1), axis=0)
        for p, q in pairs.tolist():
            adj[p].add(q)
            adj[q].add(p)

    parent = np.arange(n)
    heap = [(int(sizes[c]), int(first[c]), c) for c in range(n) if sizes[c] < min_region]
    heapq.heapify(heap)
    while heap:
        size, fst, c = heapq.heappop(heap)
        if parent[c] != c or size != sizes[c] or sizes[c] >= min_region or not adj[c]:
            continue
        target = max(adj[c], key=lambda t: (sizes[t], -first[t]))
        parent[c] = target
        sizes[target] += sizes[c]
        first[target] = min(first[target], first[c])
        for t in adj[c]:
            adj[t].discard(c)
            if t != target:
                adj[t].add(target)
                adj[target].add(t)
        adj[c] = set()
        if sizes[target] < min_region:
            heapq.heappush(heap, (int(sizes[target]), int(first[target]), target))

    # Resolve merge chains.
    root = parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    merged = root[comp]
    # Dense ids in raster order of first appearance.
    _, first_idx, inverse = np.unique(merged.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_idx))
    return order[inverse.ravel()].reshape(h, w)


def slic(img: np.ndarray, params: SlicParams | None = None) -> SuperpixelLabeling:
    """SLIC superpixels on a grayscale image.

    Centres start on a regular grid of step ``S = sqrt(N / k)`` and are moved
    to the lowest-gradient pixel of their 3x3 neighbourhood. Each iteration
    assigns pixels within a 2S x 2S window of a centre using
    ``D^2 = d_c^2 + (d_s / S)^2 m^2`` and moves centres to their cluster means.
    Afterwards every label is made 4-connected and pieces smaller than
    ``min_region`` are merged into their largest neighbour.
    """
    params = params or SlicParams()
    gray = check_gray(img).astype(np.float64)
    h, w = gray.shape
    n = h * w
    if params.k > n:
        raise KTooLarge(f"k={params.k} exceeds pixel count {n}")
    step = math.sqrt(n / params.k)
    min_region = params.min_region
    if min_region is None:
        min_region = int(round((step / 2.0) ** 2))

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    centers = _seed_centers(gray, step)
    labels = None
    for _ in range(params.iterations):
        labels = _assign(gray, centers, step, params.compactness, ys, xs)
        centers = _update(gray, labels, centers, ys, xs)
    labels = _enforce_connectivity(labels, min_region)
    return SuperpixelLabeling(labels, int(labels.max()) + 1)


def superpixel_density(lab: SuperpixelLabeling, hot: np.ndarray) -> np.ndarray:
    """Fraction of ``hot`` pixels inside each superpixel, indexed by label id."""
    hot = check_binary(hot, "hot mask")
    if hot.shape != lab.labels.shape:
        raise DimensionMismatch(f"labels {lab.labels.shape} vs hot mask {hot.shape}")
    flat = lab.labels.ravel()
    total = np.bincount(flat, minlength=lab.count).astype(np.float64)
    hits = np.bincount(flat, weights=hot.ravel().astype(np.float64), minlength=lab.count)
    return np.divide(hits, total, out=np.zeros_like(hits), where=total > 0)


class SlicSegmenter(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`slic`.

    ``transform`` maps a grayscale image to its ``(H, W)`` label image.
    """

    def __init__(self, n_segments=100, compactness=10.0, max_iter=10, min_region=None):
        self.n_segments = n_segments
        self.compactness = compactness
        self.max_iter = max_iter
        self.min_region = min_region

    def _params(self) -> SlicParams:
        return SlicParams(self.n_segments, self.compactness, self.max_iter, self.min_region)

    def fit(self, X, y=None):
        self._params()
        check_gray(X)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        lab = slic(X, self._params())
        self.n_segments_ = lab.count
        return lab.labels

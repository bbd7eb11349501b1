"""Image containers, netpbm I/O and low-level pixel operations.

Images are plain numpy arrays:

* gray image: ``(H, W)`` uint8
* rgb image: ``(H, W, 3)`` uint8
* class mask: ``(H, W)`` uint8, pixel value = class id
* binary mask: ``(H, W)`` uint8 with values in {0, 1}
* response map: ``(H, W)`` float64, non-negative
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ._validation import check_binary, check_gray, check_rgb


class NetpbmError(ValueError):
    pass


class MalformedHeader(NetpbmError):
    pass


class TruncatedData(NetpbmError):
    pass


class BadWindow(ValueError):
    pass


class BadKernel(ValueError):
    pass


# ---------------------------------------------------------------- netpbm I/O

_CHANNELS = {b"P5": 1, b"P6": 3}


def _header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace separated tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    tokens: list[bytes] = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise MalformedHeader("header ended early")
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(buf[start:pos])
    if pos >= n or not buf[pos : pos + 1].isspace():
        raise MalformedHeader("missing whitespace after header")
    return tokens, pos


def decode_netpbm(buf: bytes) -> np.ndarray:
    """Decode a binary P5/P6 image held in memory."""
    if buf[:2] not in _CHANNELS:
        raise MalformedHeader(f"unsupported magic {buf[:2]!r}")
    channels = _CHANNELS[buf[:2]]
    tokens, end = _header_tokens(buf[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise MalformedHeader(f"non-numeric header field in {tokens!r}") from exc
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"nonpositive dimensions {width}x{height}")
    if maxval != 255:
        raise MalformedHeader(f"maxval must be 255, got {maxval}")
    offset = 2 + end + 1
    nbytes = width * height * channels
    raw = buf[offset : offset + nbytes]
    if len(raw) < nbytes:
        raise TruncatedData(f"expected {nbytes} pixel bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype=np.uint8)
    if channels == 1:
        return data.reshape(height, width).copy()
    return data.reshape(height, width, 3).copy()


def encode_netpbm(img: np.ndarray) -> bytes:
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = check_gray(arr)
        magic = b"P5"
    else:
        arr = check_rgb(arr)
        magic = b"P6"
    h, w = arr.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(arr).tobytes()


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a P5 (gray) or P6 (rgb) file with maxval 255.

    Raises ``FileNotFoundError`` when the file is missing, ``MalformedHeader``
    for an unsupported or broken header and ``TruncatedData`` when the pixel
    payload is short.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    return decode_netpbm(path.read_bytes())


def save_image(path: str | os.PathLike, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_netpbm(img))


def load_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a class mask, which must be a P5 file."""
    img = load_image(path)
    if img.ndim != 2:
        raise MalformedHeader(f"class mask {path} must be P5")
    return img


# ---------------------------------------------------------- pixel operations


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma conversion with weights 0.299, 0.587, 0.114, rounded half up."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        return check_gray(arr)
    arr = check_rgb(arr).astype(np.float64)
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def _box_sum(img: np.ndarray, window: int) -> np.ndarray:
    r = window // 2
    padded = np.pad(img.astype(np.int64), r, mode="edge")
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(0).cumsum(1)
    h, w = img.shape
    return (
        ii[window : window + h, window : window + w]
        - ii[:h, window : window + w]
        - ii[window : window + h, :w]
        + ii[:h, :w]
    )


def local_mean(img: np.ndarray, window: int) -> np.ndarray:
    """Mean over a ``window`` x ``window`` neighborhood, edges replicated."""
    img = check_gray(img)
    if int(window) != window or window < 1 or window % 2 == 0:
        raise BadWindow(f"window must be odd and positive, got {window}")
    return _box_sum(img, int(window)) / float(window * window)


def adaptive_threshold(img: np.ndarray, window: int, offset: float) -> np.ndarray:
    """Binarize: 1 where ``pixel - local_mean > offset``.

    The comparison is done on integer window sums so it is exact.
    """
    img = check_gray(img)
    if int(window) != window or window < 1 or window % 2 == 0:
        raise BadWindow(f"window must be odd and positive, got {window}")
    window = int(window)
    n = window * window
    sums = _box_sum(img, window)
    return (img.astype(np.int64) * n - sums > offset * n).astype(np.uint8)


def convolve(img: np.ndarray, kernel) -> np.ndarray:
    """Absolute response of ``kernel`` slid over ``img`` (correlation form).

    Borders replicate the nearest pixel. Kernel dimensions must be odd.
    """
    img = check_gray(img).astype(np.float64)
    k = np.atleast_2d(np.asarray(kernel, dtype=np.float64))
    kh, kw = k.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise BadKernel(f"kernel dimensions must be odd, got {k.shape}")
    ry, rx = kh // 2, kw // 2
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="edge")
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            if k[i, j] != 0.0:
                out += k[i, j] * padded[i : i + h, j : j + w]
    return np.abs(out)


SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
SOBEL_DIAG = np.array([[0, 1, 2], [-1, 0, 1], [-2, -1, 0]], dtype=np.float64)
SOBEL_ANTIDIAG = np.array([[-2, -1, 0], [-1, 0, 1], [0, 1, 2]], dtype=np.float64)
FILTER_BANK = (SOBEL_X, SOBEL_Y, SOBEL_DIAG, SOBEL_ANTIDIAG)


def filter_bank_response(img: np.ndarray) -> np.ndarray:
    """Per-pixel max of the absolute Sobel responses in four orientations."""
    img = check_gray(img)
    return np.maximum.reduce([convolve(img, k) for k in FILTER_BANK])


def extract_class_mask(mask: np.ndarray, classes) -> np.ndarray:
    """Binary mask of pixels whose label is one of ``classes``."""
    mask = check_gray(mask, "class mask")
    ids = np.fromiter((int(c) for c in classes), dtype=np.int64)
    if ids.size == 0:
        return np.zeros(mask.shape, dtype=np.uint8)
    return np.isin(mask, ids).astype(np.uint8)


def otsu_threshold(values: np.ndarray) -> float:
    """Otsu split of a 1-D sample of real values.

    Returns the threshold ``t`` maximizing between-class variance; the upper
    class is ``values > t``. Constant input returns its value.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        return 0.0
    if v[0] == v[-1]:
        return float(v[0])
    uniq, counts = np.unique(v, return_counts=True)
    w0 = np.cumsum(counts)[:-1].astype(np.float64)
    s0 = np.cumsum(uniq * counts)[:-1]
    total_w = float(v.size)
    total_s = float(v.sum())
    w1 = total_w - w0
    m0 = s0 / w0
    m1 = (total_s - s0) / w1
    between = w0 * w1 * (m0 - m1) ** 2
    return float(uniq[int(np.argmax(between))])


def binary_erode(mask: np.ndarray) -> np.ndarray:
    """3x3 erosion; pixels outside the image count as background."""
    m = check_binary(mask).astype(bool)
    p = np.pad(m, 1, constant_values=False)
    h, w = m.shape
    out = np.ones_like(m)
    for dy in range(3):
        for dx in range(3):
            out &= p[dy : dy + h, dx : dx + w]
    return out.astype(np.uint8)

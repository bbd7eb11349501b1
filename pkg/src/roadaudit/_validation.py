"""Input validation helpers shared by the estimators and module functions."""
from __future__ import annotations

import numpy as np


class DimensionMismatch(ValueError):
    pass


def check_gray(img, name: str = "image") -> np.ndarray:
    """Return ``img`` as a 2-D uint8 array, raising on anything else."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError(f"{name} values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_rgb(img, name: str = "image") -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        arr = arr.astype(np.uint8)
    return arr


def check_binary(mask, name: str = "mask") -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.uint8)


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what} differ in size: {a.shape[:2]} vs {b.shape[:2]}")


def check_odd(n: int, name: str) -> int:
    if int(n) != n or n < 1 or n % 2 == 0:
        raise ValueError(f"{name} must be a positive odd integer, got {n}")
    return int(n)


def check_unit_interval(x: float, name: str, *, open_low: bool = False) -> float:
    x = float(x)
    ok = (0.0 < x <= 1.0) if open_low else (0.0 <= x <= 1.0)
    if not ok:
        raise ValueError(f"{name} out of range: {x}")
    return x

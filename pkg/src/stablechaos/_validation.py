"""Input validation helpers shared by the public modules."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_points(X, d: int, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a float array of shape ``(n_points, d)``.

    A single point given as a 1-d sequence of length ``d`` is promoted to
    shape ``(1, d)``.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != d:
            raise ValueError(f"{name} has {arr.shape[0]} coordinates, expected {d}")
        arr = arr[None, :]
    arr = check_array(arr, dtype=float, ensure_2d=True, input_name=name)
    if arr.shape[1] != d:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {d}")
    return arr


def check_positive(value, name: str, strict: bool = True) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_order(n, name: str = "n") -> int:
    if not isinstance(n, numbers.Integral) or n < 0:
        raise ValueError(f"{name} must be a nonnegative integer, got {n!r}")
    return int(n)

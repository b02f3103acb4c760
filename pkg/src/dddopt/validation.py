"""Small input-validation helpers shared by the estimator facade and CLI."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, LabelError


def check_matrix(X) -> np.ndarray:
    """2-D float64 C-contiguous array or DimensionError."""
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DimensionError("matrix contains non-finite values")
    return arr


def check_vector(y, length: int | None = None) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64).reshape(-1)
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"expected length {length}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise DimensionError("vector contains non-finite values")
    return arr


def check_binary_labels(y) -> tuple[np.ndarray, np.ndarray]:
    """Map a two-class label vector onto {-1, +1}.

    Returns (mapped, classes) where classes has the two original labels in
    sorted order; mapped is -1 for classes[0] and +1 for classes[1].
    """
    arr = np.asarray(y).reshape(-1)
    classes = np.unique(arr)
    if classes.shape[0] != 2:
        raise LabelError(f"expected exactly 2 classes, found {classes.shape[0]}")
    return np.where(arr == classes[1], 1.0, -1.0), classes


def check_fraction(name: str, value: float) -> float:
    if not 0.0 < value <= 1.0:
        raise ValueError(f"{name} must be in (0, 1], got {value}")
    return float(value)

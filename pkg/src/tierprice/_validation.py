"""Input validation helpers layered on sklearn's checks."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import InsufficientDataError


def as_1d_float(values, name="y", min_length=1):
    """Return a finite float64 1-D copy of ``values``.

    Accepts lists, arrays, ``(n, 1)`` column arrays and ``MonthlySeries``.
    """
    values = getattr(values, "values", values)
    arr = check_array(
        np.asarray(values, dtype=float).reshape(-1, 1)
        if np.ndim(values) <= 1
        else values,
        ensure_2d=True,
        ensure_min_samples=0,
        dtype=np.float64,
        input_name=name,
    )
    if arr.shape[1] != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr = arr[:, 0].copy()
    if arr.size < min_length:
        raise InsufficientDataError(
            f"{name} needs at least {min_length} observations, got {arr.size}"
        )
    return arr


def as_counts(values, name="requests"):
    """Nonnegative integer-valued 1-D array (returned as int64)."""
    arr = as_1d_float(values, name=name, min_length=0)
    if np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    if np.any(arr != np.round(arr)):
        raise ValueError(f"{name} must be whole numbers")
    return arr.astype(np.int64)


def check_strictly_increasing(x, name="x"):
    if x.size > 1 and np.any(np.diff(x) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return x

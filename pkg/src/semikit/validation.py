"""Input validation helpers used across the package.

These mirror the spirit of scikit-learn's ``check_array`` but stay small and
raise this package's error types so callers get consistent messages.
"""

from __future__ import annotations

import numbers

import numpy as np

from .errors import ShapeError


def check_features(x, name="X", allow_1d=False):
    """Coerce to a float64 2-D array of finite values.

    1-D input is promoted to a single row when ``allow_1d`` is set.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1 and allow_1d:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise ValueError(f"{name} contains non-finite values (first bad row: {bad})")
    return arr


def check_labels(y, n_classes=None, name="y"):
    """Coerce to an int array of class indices, optionally bounded by ``n_classes``."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(np.asarray(arr, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(arr, dtype=np.float64)):
            raise ValueError(f"{name} must contain integer class labels")
        arr = rounded
    arr = arr.astype(np.int64, copy=False)
    if n_classes is not None and arr.size:
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(
                f"{name} labels must lie in [0, {n_classes}), "
                f"got range [{arr.min()}, {arr.max()}]"
            )
    return arr


def check_probability_rows(p, name="probabilities"):
    """Validate rows of strictly positive probabilities summing to 1."""
    arr = np.asarray(p, dtype=np.float64)
    rows = arr[np.newaxis, :] if arr.ndim == 1 else arr
    if np.any(rows <= 0.0):
        raise ValueError(f"{name} must be strictly positive")
    sums = rows.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError(f"{name} rows must sum to 1 (got sums in "
                         f"[{sums.min()}, {sums.max()}])")
    return arr


def check_in_unit_interval(x, name="value", open_left=False, open_right=False):
    """Validate scalars or arrays lie in [0, 1] (optionally open endpoints)."""
    arr = np.asarray(x, dtype=np.float64)
    lo_bad = np.any(arr <= 0.0) if open_left else np.any(arr < 0.0)
    hi_bad = np.any(arr >= 1.0) if open_right else np.any(arr > 1.0)
    if lo_bad or hi_bad:
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}")
    return arr


def as_rng(seed_or_rng):
    """Accept a Generator, a seed, or None and return a numpy Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if seed_or_rng is None or isinstance(seed_or_rng, numbers.Integral):
        return np.random.default_rng(seed_or_rng)
    raise TypeError(f"expected a seed or numpy Generator, got {type(seed_or_rng)!r}")

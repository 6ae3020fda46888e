"""Input validation helpers shared by the public functions and estimators."""

import numpy as np


def check_raster(r, name="raster", dtype=np.float64):
    """Return `r` as a 2-D float array, raising ``ValueError`` otherwise."""
    arr = np.asarray(r, dtype=dtype)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    return arr


def check_mask(m, shape=None, name="mask"):
    arr = np.asarray(m)
    if arr.dtype != bool:
        arr = arr.astype(bool)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_same_shape(*arrays, names=None):
    """Raise ``ValueError`` unless all arrays share one shape; return that shape."""
    shapes = [np.shape(a) for a in arrays]
    if len(set(shapes)) > 1:
        if names is None:
            names = [f"arg{i}" for i in range(len(arrays))]
        detail = ", ".join(f"{n}={s}" for n, s in zip(names, shapes))
        raise ValueError(f"dimension mismatch between co-indexed rasters: {detail}")
    return shapes[0]


def check_stack(X, n_min=1, name="X"):
    """Return a 3-D float stack ``(n_frames, height, width)``."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be a 3-D stack (frames, height, width), got shape {arr.shape}")
    if arr.shape[0] < n_min:
        raise ValueError(f"{name} needs at least {n_min} frames, got {arr.shape[0]}")
    return arr


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_nonnegative(value, name):
    if not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value

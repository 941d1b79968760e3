"""Input checks for the estimator API."""

import numpy as np

from .errors import DimensionMismatch, ValueOutOfRange


def check_maps(X, name="X"):
    """Return ``X`` as a float64 stack of shape (n_maps, H, W) plus a was-2D flag.

    Accepts a single 2D map or a 3D stack.  Rejects non-finite values.
    """
    arr = np.asarray(X, dtype=np.float64)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise DimensionMismatch(f"{name} must be a 2D map or a stack of maps, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueOutOfRange(f"{name} contains NaN or infinite values")
    return arr, single


def check_unit_interval(arr, name="X"):
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueOutOfRange(f"{name} must lie in [0, 1]")
    return arr


def check_same_stack(X, Y, name="guidance"):
    if Y.shape[0] not in (1, X.shape[0]):
        raise DimensionMismatch(f"{name} has {Y.shape[0]} maps for {X.shape[0]} inputs")
    return np.broadcast_to(Y, (X.shape[0],) + Y.shape[1:])


def unstack(arr, single):
    return arr[0] if single else arr

"""Input validation helpers shared by the public API."""

import math
import numbers

import numpy as np


def check_finite(value, name):
    """Return ``value`` as float, raising ``ValueError`` if it is not finite."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(value, name, strict=True):
    value = check_finite(value, name)
    if value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return value


def check_interval(value, name, low, high):
    value = check_finite(value, name)
    if not low <= value <= high:
        raise ValueError(f"{name} must lie in [{low}, {high}], got {value!r}")
    return value


def check_ue_index(k):
    if k not in (1, 2) or isinstance(k, bool):
        raise ValueError(f"UE index must be 1 or 2, got {k!r}")
    return int(k)


def check_qam_order(M):
    """Validate a square QAM order (4, 16, 64, ...) and return sqrt(M)."""
    if isinstance(M, bool) or not isinstance(M, numbers.Integral):
        raise TypeError(f"modulation order must be an integer, got {M!r}")
    M = int(M)
    side = math.isqrt(M) if M > 0 else 0
    if M < 4 or side * side != M or side & (side - 1):
        raise ValueError(f"modulation order must be a square power of two >= 4, got {M}")
    return side


def check_positions(x, length, name="x"):
    """Validate scalar or array PA positions against the waveguide ``[0, length]``."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr < 0) or np.any(arr > length):
        raise ValueError(f"{name} must lie in [0, {length}]")
    return arr


def check_curve(values, name="curve"):
    """Coerce a 1-D sampled curve to a float array without NaN/inf."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite samples")
    return arr

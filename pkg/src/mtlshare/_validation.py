"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numpy as np

from .exceptions import ArgumentError


def check_matrix(M, name="M", allow_empty=False):
    """Return ``M`` as a finite 2-D float64 array or raise ``ArgumentError``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {M.shape}")
    if not allow_empty and M.size == 0:
        raise ArgumentError(f"{name} is empty")
    if not np.all(np.isfinite(M)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return M


def check_vector(v, name="v", size=None):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1:
        raise ArgumentError(f"{name} must be 1-D, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise ArgumentError(f"{name} has length {v.shape[0]}, expected {size}")
    if not np.all(np.isfinite(v)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return v


def check_count(n, name="n", minimum=1):
    if isinstance(n, bool) or int(n) != n:
        raise ArgumentError(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if n < minimum:
        raise ArgumentError(f"{name} must be >= {minimum}, got {n}")
    return n


def check_fraction(p, name="p"):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"{name} must lie in [0, 1], got {p}")
    return p

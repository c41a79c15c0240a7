"""Input validation helpers.

Small checkers in the spirit of ``sklearn.utils.validation``: each takes a
loosely typed input, returns a canonical ``float64`` ndarray, and raises
with a readable message otherwise.  All geometric code goes through these
so that shape and norm conventions are enforced in exactly one place.
"""

from __future__ import annotations

import numpy as np

UNIT_ATOL = 1e-9
ORTHO_ATOL = 1e-9


def unit_vector(v, name: str = "vector") -> np.ndarray:
    """Return ``v`` as a unit-norm float64 array of shape (3,).

    The input is normalized, so any non-zero 3-vector is accepted.

    Parameters
    ----------
    v : array-like of shape (3,)
        Direction to normalize.
    name : str
        Label used in error messages.

    Raises
    ------
    ValueError
        If ``v`` is not a finite 3-vector or has (near-)zero norm.
    """
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    n = np.linalg.norm(a)
    if n < 1e-12:
        raise ValueError(f"{name} must be non-zero")
    return a / n


def check_unit(v, name: str = "vector") -> np.ndarray:
    """Like :func:`unit_vector` but requires the input to already be unit norm."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {a.shape}")
    n = np.linalg.norm(a)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"{name} must be unit norm, got |{name}| = {n:.6g}")
    return a / n


def unit_vectors(arr, name: str = "vectors") -> np.ndarray:
    """Return ``arr`` as an (N, 3) float64 array of unit rows.

    Rows are normalized; zero rows are rejected.
    """
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    n = np.linalg.norm(a, axis=1)
    if np.any(n < 1e-12):
        raise ValueError(f"{name} contains a zero row")
    return a / n[:, None]


def check_rotation(m, name: str = "rotation") -> np.ndarray:
    """Return ``m`` as a validated 3x3 rotation matrix.

    Requires m.T @ m = I and det m = +1 within ``ORTHO_ATOL``-ish slack
    (1e-6 is used for the check; construction code should be far tighter).
    """
    a = np.asarray(m, dtype=np.float64)
    if a.shape != (3, 3):
        raise ValueError(f"{name} must have shape (3, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    err = np.abs(a.T @ a - np.eye(3)).max()
    if err > 1e-6:
        raise ValueError(f"{name} is not orthonormal (max |R^T R - I| = {err:.3g})")
    if np.linalg.det(a) < 0:
        raise ValueError(f"{name} has determinant -1 (reflection, not rotation)")
    return a


def check_raster(values, valid, name: str = "raster"):
    """Validate a per-pixel array plus boolean mask of matching leading shape."""
    vals = np.asarray(values)
    mask = np.asarray(valid, dtype=bool)
    if vals.ndim < 2:
        raise ValueError(f"{name} must be at least 2-D, got shape {vals.shape}")
    if mask.shape != vals.shape[:2]:
        raise ValueError(
            f"{name} mask shape {mask.shape} does not match raster {vals.shape[:2]}"
        )
    return vals, mask


def same_shape(a, b, name_a: str = "a", name_b: str = "b") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")

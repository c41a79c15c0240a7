"""Rotations, pinhole intrinsics, and the rotation-induced point warp.

COORDINATE SYSTEM CONVENTIONS
-----------------------------
Camera frame: x right, y down, z forward (optical axis).  The same axes
serve as the world frame of the synthetic scenes, so the world down
direction is ``(0, 1, 0)`` and gravity measured by an upright camera is
``(0, 1, 0)`` as well.

Positive pitch tilts the camera downward (gravity acquires a positive z
component); positive roll turns it about the optical axis.  Pixel
coordinates follow the usual image convention: ``u`` right, ``v`` down,
with ``(0, 0)`` at the top-left pixel center.

All rotations are plain 3x3 float64 matrices acting on column vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import AntipodalInput
from .validation import check_rotation, check_unit

# Guard for the antipodal singularity of the two-vector rotation and for
# rays leaving the forward hemisphere.  Well above double-precision noise,
# far below any physically meaningful near-antipodal configuration.
EPS_ANTIPODAL = 1e-8
EPS_RAY_Z = 1e-8

__all__ = [
    "CameraIntrinsics",
    "rotation_between",
    "rotation_from_gravity_principal",
    "homography_from_rotation",
    "warp_point",
    "warp_points",
    "ray_z_factor",
    "ray_z_factors",
    "axis_angle_rotation",
    "pitch_rotation",
    "roll_rotation",
    "geodesic_angle",
    "pixel_grid",
]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with the image size they refer to.

    Parameters
    ----------
    fx, fy : float
        Focal lengths in pixels.
    cx, cy : float
        Principal point in pixels.
    width, height : int
        Image size in pixels.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width >= 1 and self.height >= 1):
            raise ValueError("image size must be at least 1x1")

    def matrix(self) -> np.ndarray:
        """Return the 3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self) -> np.ndarray:
        """Return K^-1 in closed form."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


def rotation_between(g, r) -> np.ndarray:
    """Minimal rotation taking unit vector ``g`` onto unit vector ``r``.

    Uses the closed form

        R = I + 2 r g^T - (r + g)(r + g)^T / (1 + r.g)

    whose axis lies perpendicular to span{g, r}, i.e. the rotation carries
    no twist about either input direction.

    Parameters
    ----------
    g, r : array-like of shape (3,)
        Unit source and target directions.

    Returns
    -------
    ndarray of shape (3, 3)
        Rotation with ``R @ g == r`` to within 1e-9.

    Raises
    ------
    AntipodalInput
        If ``1 + r.g <= 1e-8``; the rotation axis is then undefined.
    """
    g = check_unit(g, "g")
    r = check_unit(r, "r")
    d = 1.0 + float(r @ g)
    if d <= EPS_ANTIPODAL:
        raise AntipodalInput("directions are antipodal; minimal rotation undefined")
    s = r + g
    return np.eye(3) + 2.0 * np.outer(r, g) - np.outer(s, s) / d


def rotation_from_gravity_principal(g, e) -> np.ndarray:
    """Rotation parametrized by a (gravity, principal direction) pair.

    The pair represents the unique twist-free rotation with ``R @ g == e``;
    this is simply :func:`rotation_between` under a domain-specific name.

    Raises
    ------
    AntipodalInput
        If g and e are antipodal.
    """
    return rotation_between(g, e)


def homography_from_rotation(k: CameraIntrinsics, r) -> np.ndarray:
    """Homography H = K R K^-1 induced by a pure camera rotation.

    H maps homogeneous pixels of the source image to pixels of the image a
    camera rotated by ``r`` would capture from the same position.
    """
    r = check_rotation(r)
    return k.matrix() @ r @ k.inverse_matrix()


def _lift(x, k: CameraIntrinsics) -> np.ndarray:
    # K^-1 x~ with the homogeneous lift normalized to z = 1
    u, v = float(x[0]), float(x[1])
    return np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])


def warp_point(x, k: CameraIntrinsics, r):
    """Map pixel ``x`` through the rotation-induced warp.

    The pixel ray is rotated by ``r`` and reprojected.  Points whose
    rotated ray leaves the forward hemisphere have no image and yield
    ``None`` rather than an exception: per-pixel invalidity is expected
    and mass-produced at large tilts.

    Parameters
    ----------
    x : (u, v) pair
        Source pixel, sub-pixel coordinates permitted.
    k : CameraIntrinsics
    r : ndarray of shape (3, 3)

    Returns
    -------
    (float, float) or None
        Destination pixel, or None if the rotated ray has z <= 1e-8.
    """
    ray = np.asarray(r, dtype=np.float64) @ _lift(x, k)
    if ray[2] <= EPS_RAY_Z:
        return None
    return (k.fx * ray[0] / ray[2] + k.cx, k.fy * ray[1] / ray[2] + k.cy)


def warp_points(uv: np.ndarray, k: CameraIntrinsics, r) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`warp_point` over an (N, 2) array of pixels.

    Returns
    -------
    warped : ndarray of shape (N, 2)
        Destination pixels; rows with invalid rays are filled with NaN.
    valid : ndarray of shape (N,) of bool
        True where the rotated ray stays in the forward hemisphere.
    """
    uv = np.asarray(uv, dtype=np.float64)
    rays = np.empty((uv.shape[0], 3))
    rays[:, 0] = (uv[:, 0] - k.cx) / k.fx
    rays[:, 1] = (uv[:, 1] - k.cy) / k.fy
    rays[:, 2] = 1.0
    rot = rays @ np.asarray(r, dtype=np.float64).T
    valid = rot[:, 2] > EPS_RAY_Z
    out = np.full_like(uv, np.nan)
    z = rot[valid, 2]
    out[valid, 0] = k.fx * rot[valid, 0] / z + k.cx
    out[valid, 1] = k.fy * rot[valid, 1] / z + k.cy
    return out, valid


def ray_z_factor(x, k: CameraIntrinsics, r) -> float:
    """z-component of the rotated pixel ray, (R K^-1 x~)_z with z-lift 1.

    This is the scalar by which a depth value is multiplied when the map
    it belongs to is transported into a camera rotated by ``r``.  May be
    <= 0; callers treat non-positive factors as invalid for depth
    transport.
    """
    ray = np.asarray(r, dtype=np.float64) @ _lift(x, k)
    return float(ray[2])


def ray_z_factors(uv: np.ndarray, k: CameraIntrinsics, r) -> np.ndarray:
    """Vectorized :func:`ray_z_factor` over an (N, 2) pixel array."""
    uv = np.asarray(uv, dtype=np.float64)
    rz = np.asarray(r, dtype=np.float64)[2]
    return (
        (uv[:, 0] - k.cx) / k.fx * rz[0]
        + (uv[:, 1] - k.cy) / k.fy * rz[1]
        + rz[2]
    )


def axis_angle_rotation(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues formula: rotation by ``angle_rad`` about unit ``axis``."""
    a = check_unit(axis, "axis")
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    kx = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + s * kx + (1.0 - c) * (kx @ kx)


def pitch_rotation(angle_deg: float) -> np.ndarray:
    """World-to-camera rotation of a camera pitched down by ``angle_deg``.

    An upright camera measuring gravity (0, 1, 0) measures
    (0, cos a, sin a) after this pitch.
    """
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def roll_rotation(angle_deg: float) -> np.ndarray:
    """World-to-camera rotation of a camera rolled by ``angle_deg`` about its optical axis."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def geodesic_angle(r1, r2) -> float:
    """Geodesic distance on SO(3) between two rotations, in radians."""
    m = np.asarray(r1, dtype=np.float64).T @ np.asarray(r2, dtype=np.float64)
    c = (np.trace(m) - 1.0) / 2.0
    return float(math.acos(min(1.0, max(-1.0, c))))


def pixel_grid(k: CameraIntrinsics) -> np.ndarray:
    """All integer pixel centers of the image as an (H*W, 2) array, row-major."""
    u, v = np.meshgrid(np.arange(k.width), np.arange(k.height))
    return np.stack([u.ravel(), v.ravel()], axis=1).astype(np.float64)

"""Analytic pinhole renderer for plane/box scenes with exact ground truth.

Every pixel is ray-cast against the scene's primitives in closed form, so
depth, normals, and camera-frame gravity are exact to double precision.
That exactness is what lets the warp and rectification tests attribute
every error they see to resampling alone.

Rays are lifted with z = 1, so the intersection parameter t is directly
the camera-frame depth.  Surfaces carry a smooth sine-product albedo
(a soft checkerboard) because hard-edged textures would dominate the
round-trip PSNR with aliasing that says nothing about the warp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .frames import DEFAULT_D_MAX, DepthMap, FrameBundle, NormalMap
from .geometry import CameraIntrinsics, pitch_rotation, roll_rotation
from .validation import check_rotation, unit_vector

_T_MIN = 1e-6

__all__ = [
    "Plane",
    "Box",
    "Scene",
    "CameraPose",
    "render_view",
    "standard_scene",
    "standard_intrinsics",
    "standard_tilt_suite",
    "scene_to_json",
    "scene_from_json",
]


@dataclass
class Plane:
    """Finite rectangle: center point, unit normal, in-plane u axis, half extents.

    The second in-plane axis is ``normal x u_axis``; the rectangle covers
    [-half_extent[0], +half_extent[0]] along u and likewise along v.
    """

    center: np.ndarray
    normal: np.ndarray
    u_axis: np.ndarray
    half_extent: tuple[float, float]
    albedo_period: float = 0.5

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.normal = unit_vector(self.normal, "plane normal")
        u = unit_vector(self.u_axis, "plane u_axis")
        # remove any component along the normal so the frame is orthonormal
        u = u - (u @ self.normal) * self.normal
        self.u_axis = unit_vector(u, "plane u_axis")
        if min(self.half_extent) <= 0 or self.albedo_period <= 0:
            raise ValueError("plane extents and albedo period must be positive")

    @property
    def v_axis(self) -> np.ndarray:
        return np.cross(self.normal, self.u_axis)


@dataclass
class Box:
    """Axis-aligned box in world coordinates."""

    lo: np.ndarray
    hi: np.ndarray
    albedo_period: float = 0.5

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if np.any(self.hi <= self.lo) or self.albedo_period <= 0:
            raise ValueError("box must have positive extent and albedo period")


@dataclass
class Scene:
    """A set of primitives plus the world down direction."""

    primitives: list
    gravity_world: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("scene needs at least one primitive")
        self.gravity_world = unit_vector(self.gravity_world, "gravity_world")


@dataclass
class CameraPose:
    """World-to-camera rotation plus camera position in world coordinates."""

    rotation: np.ndarray
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = check_rotation(self.rotation, "pose rotation")
        self.position = np.asarray(self.position, dtype=np.float64)


def _albedo(a: np.ndarray, b: np.ndarray, period: float) -> np.ndarray:
    """Smooth three-channel texture from two surface coordinates, in [0, 1]."""
    x = 2.0 * math.pi * a / period
    y = 2.0 * math.pi * b / period
    r = 0.5 + 0.35 * np.sin(x) * np.sin(y)
    g = 0.5 + 0.35 * np.sin(x + 2.0) * np.sin(y + 1.0)
    bch = 0.5 + 0.35 * np.cos(x) * np.cos(y)
    return np.stack([r, g, bch], axis=-1)


def _intersect_plane(p: Plane, origin: np.ndarray, dirs: np.ndarray):
    denom = dirs @ p.normal
    offs = (p.center - origin) @ p.normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-12, offs / denom, np.inf)
    hit_pts = origin + t[:, None] * dirs
    rel = hit_pts - p.center
    su = rel @ p.u_axis
    sv = rel @ p.v_axis
    ok = (
        (t > _T_MIN)
        & np.isfinite(t)
        & (np.abs(su) <= p.half_extent[0])
        & (np.abs(sv) <= p.half_extent[1])
    )
    normals = np.broadcast_to(p.normal, dirs.shape)
    albedo = _albedo(su, sv, p.albedo_period)
    return t, ok, normals, albedo


def _intersect_box(b: Box, origin: np.ndarray, dirs: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
    t_lo = (b.lo - origin) * inv
    t_hi = (b.hi - origin) * inv
    t1 = np.minimum(t_lo, t_hi)
    t2 = np.maximum(t_lo, t_hi)
    t_near = t1.max(axis=1)
    t_far = t2.min(axis=1)
    ok = (t_near <= t_far) & (t_near > _T_MIN)
    # entry face: the axis achieving t_near, signed by ray direction
    axis = np.argmax(t1, axis=1)
    normals = np.zeros_like(dirs)
    rows = np.arange(dirs.shape[0])
    normals[rows, axis] = -np.sign(dirs[rows, axis])
    hit_pts = origin + t_near[:, None] * dirs
    # albedo from the two in-face coordinates
    other = np.stack([(axis + 1) % 3, (axis + 2) % 3], axis=1)
    a = hit_pts[rows, other[:, 0]]
    c = hit_pts[rows, other[:, 1]]
    albedo = _albedo(a, c, b.albedo_period)
    return t_near, ok, normals, albedo


def render_view(
    s: Scene, k: CameraIntrinsics, pose: CameraPose, d_max: float = DEFAULT_D_MAX
) -> FrameBundle:
    """Ray-cast the scene into a frame bundle seen from ``pose``.

    Depth is the camera-frame z of the nearest hit; normals are expressed
    in the camera frame and flipped to face the camera; gravity is the
    world down direction rotated into the camera.  Pixels with no hit, or
    a hit beyond ``d_max``, are invalid.
    """
    h, w = k.height, k.width
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    rays_cam = np.stack(
        [(u.ravel() - k.cx) / k.fx, (v.ravel() - k.cy) / k.fy, np.ones(h * w)], axis=1
    )
    r_wc = pose.rotation
    dirs = rays_cam @ r_wc  # camera rays expressed in world coordinates
    origin = pose.position

    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_n = np.zeros((n, 3))
    best_alb = np.zeros((n, 3))
    for prim in s.primitives:
        if isinstance(prim, Plane):
            t, ok, normals, albedo = _intersect_plane(prim, origin, dirs)
        elif isinstance(prim, Box):
            t, ok, normals, albedo = _intersect_box(prim, origin, dirs)
        else:
            raise TypeError(f"unknown primitive type {type(prim).__name__}")
        closer = ok & (t < best_t)
        best_t[closer] = t[closer]
        best_n[closer] = normals[closer]
        best_alb[closer] = albedo[closer]

    valid = np.isfinite(best_t) & (best_t > 0) & (best_t <= d_max)
    depth = DepthMap(
        np.where(valid, best_t, 0.0).reshape(h, w), valid.reshape(h, w), d_max
    )

    normals_cam = best_n @ r_wc.T
    # orientation: normals face the camera along the viewing ray
    flip = np.einsum("ij,ij->i", normals_cam, rays_cam) > 0
    normals_cam[flip] *= -1.0
    normals_cam[~valid] = 0.0
    normals = NormalMap(normals_cam.reshape(h, w, 3), valid.reshape(h, w))

    ray_norm = rays_cam / np.linalg.norm(rays_cam, axis=1, keepdims=True)
    lambert = 0.45 + 0.55 * np.abs(np.einsum("ij,ij->i", normals_cam, ray_norm))
    rgb = np.clip(np.rint(255.0 * best_alb * lambert[:, None]), 0, 255).astype(np.uint8)
    rgb[~valid] = 0
    rgb = rgb.reshape(h, w, 3)

    return FrameBundle(rgb, depth, normals, r_wc @ s.gravity_world, k)


def standard_scene() -> Scene:
    """Fixed reference scene: a floor, two walls at different depths, one box.

    Deliberate layout details: the walls stop 1.05 m below eye level and
    the floor stops 2 m out, which leaves a no-hit band between floor and
    walls in every view, and the two walls are separated by a 0.2 m slit.
    Region boundaries in the image are therefore bordered by invalid
    pixels instead of valid/valid seams, which would otherwise dominate
    nearest-neighbor resampling error in the equivariance checks.
    """
    floor = Plane(
        center=(0.0, 1.2, 0.0),
        normal=(0.0, -1.0, 0.0),
        u_axis=(1.0, 0.0, 0.0),
        half_extent=(4.0, 2.0),
        albedo_period=0.7,
    )
    wall_left = Plane(
        center=(-2.05, -1.175, 3.0),
        normal=(0.0, 0.0, -1.0),
        u_axis=(1.0, 0.0, 0.0),
        half_extent=(1.95, 2.225),
        albedo_period=0.9,
    )
    wall_right = Plane(
        center=(2.05, -1.175, 3.4),
        normal=(0.0, 0.0, -1.0),
        u_axis=(1.0, 0.0, 0.0),
        half_extent=(1.95, 2.225),
        albedo_period=0.9,
    )
    box = Box(lo=(0.25, 0.0, 1.3), hi=(0.85, 0.55, 1.8), albedo_period=0.3)
    return Scene([floor, wall_left, wall_right, box], gravity_world=(0.0, 1.0, 0.0))


def standard_intrinsics(width: int = 320, height: int = 240) -> CameraIntrinsics:
    """Wide-angle intrinsics used by the tilt suite (vertical half-FOV ~47 deg)."""
    f = 110.0 * width / 320.0
    return CameraIntrinsics(
        fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, width=width, height=height
    )


def standard_tilt_suite(
    k: CameraIntrinsics, angles_deg, axis: str = "pitch"
) -> list[FrameBundle]:
    """Render the reference scene at each tilt angle about one axis.

    ``axis`` is "pitch" (positive looks down) or "roll".  The camera sits
    at the world origin; only its orientation changes, which is exactly
    the setting the rotation-induced warp models.
    """
    if axis not in ("pitch", "roll"):
        raise ValueError(f"axis must be 'pitch' or 'roll', got {axis!r}")
    scene = standard_scene()
    rot = pitch_rotation if axis == "pitch" else roll_rotation
    out = []
    for a in angles_deg:
        if not math.isfinite(float(a)):
            raise ValueError(f"tilt angle must be finite, got {a!r}")
        out.append(render_view(scene, k, CameraPose(rot(float(a)))))
    return out


def scene_to_json(s: Scene) -> str:
    """Serialize a scene to a JSON string (inverse of :func:`scene_from_json`)."""
    prims = []
    for p in s.primitives:
        if isinstance(p, Plane):
            prims.append(
                {
                    "type": "plane",
                    "center": list(p.center),
                    "normal": list(p.normal),
                    "u_axis": list(p.u_axis),
                    "half_extent": list(p.half_extent),
                    "albedo_period": p.albedo_period,
                }
            )
        elif isinstance(p, Box):
            prims.append(
                {
                    "type": "box",
                    "lo": list(p.lo),
                    "hi": list(p.hi),
                    "albedo_period": p.albedo_period,
                }
            )
        else:
            raise TypeError(f"unknown primitive type {type(p).__name__}")
    doc = {"gravity_world": list(s.gravity_world), "primitives": prims}
    return json.dumps(doc, sort_keys=True)


def scene_from_json(text: str) -> Scene:
    """Parse a scene from its JSON form."""
    doc = json.loads(text)
    prims = []
    for p in doc["primitives"]:
        if p["type"] == "plane":
            prims.append(
                Plane(
                    center=p["center"],
                    normal=p["normal"],
                    u_axis=p["u_axis"],
                    half_extent=tuple(p["half_extent"]),
                    albedo_period=p["albedo_period"],
                )
            )
        elif p["type"] == "box":
            prims.append(Box(lo=p["lo"], hi=p["hi"], albedo_period=p["albedo_period"]))
        else:
            raise ValueError(f"unknown primitive type {p['type']!r}")
    return Scene(prims, gravity_world=doc["gravity_world"])

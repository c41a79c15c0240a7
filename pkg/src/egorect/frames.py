"""Raster containers: depth maps, normal maps, and co-registered frame bundles.

Validity is carried as an explicit boolean mask per raster, never encoded
as 0/NaN sentinel values.  Constructors sanitize rather than reject:
out-of-range depths and degenerate normal vectors are marked invalid,
because downstream warping produces such pixels in bulk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics
from .validation import check_raster, check_unit

# Sensor-style maximum trustworthy depth, in meters.
DEFAULT_D_MAX = 5.46

__all__ = ["DEFAULT_D_MAX", "DepthMap", "NormalMap", "FrameBundle"]


@dataclass
class DepthMap:
    """Per-pixel depth in meters with a validity mask.

    Valid pixels always hold values in (0, d_max]; pixels outside that
    range (or non-finite) are silently marked invalid on construction.
    """

    values: np.ndarray
    valid: np.ndarray
    d_max: float = DEFAULT_D_MAX

    def __post_init__(self):
        vals, mask = check_raster(self.values, self.valid, "depth")
        if vals.ndim != 2:
            raise ValueError(f"depth values must be 2-D, got shape {vals.shape}")
        vals = vals.astype(np.float64, copy=False)
        in_range = np.isfinite(vals) & (vals > 0.0) & (vals <= self.d_max)
        self.values = vals
        self.valid = mask & in_range

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_fraction(self) -> float:
        return float(self.valid.mean())

    def copy(self) -> "DepthMap":
        return DepthMap(self.values.copy(), self.valid.copy(), self.d_max)


@dataclass
class NormalMap:
    """Per-pixel unit surface normals with a validity mask.

    Orientation convention: a valid normal faces the camera, i.e. its dot
    product with the pixel ray is negative.  Constructors renormalize;
    near-zero vectors become invalid.
    """

    vectors: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        vecs, mask = check_raster(self.vectors, self.valid, "normals")
        if vecs.ndim != 3 or vecs.shape[2] != 3:
            raise ValueError(f"normal vectors must be (H, W, 3), got {vecs.shape}")
        vecs = vecs.astype(np.float64, copy=False)
        norms = np.linalg.norm(vecs, axis=2)
        ok = np.isfinite(norms) & (norms > 1e-6)
        safe = np.where(ok, norms, 1.0)
        self.vectors = vecs / safe[:, :, None]
        self.valid = mask & ok

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape[:2]

    def valid_fraction(self) -> float:
        return float(self.valid.mean())

    def copy(self) -> "NormalMap":
        return NormalMap(self.vectors.copy(), self.valid.copy())


@dataclass
class FrameBundle:
    """One co-registered sample: RGB, depth, normals, gravity, intrinsics.

    All rasters share the intrinsics' height x width; gravity is the world
    down direction expressed in this camera's frame.
    """

    rgb: np.ndarray
    depth: DepthMap
    normals: NormalMap
    gravity: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        self.gravity = check_unit(self.gravity, "gravity")
        rgb = np.asarray(self.rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (H, W, 3), got {rgb.shape}")
        self.rgb = rgb.astype(np.uint8, copy=False)
        hw = (self.intrinsics.height, self.intrinsics.width)
        for name, shape in (
            ("rgb", rgb.shape[:2]),
            ("depth", self.depth.shape),
            ("normals", self.normals.shape),
        ):
            if shape != hw:
                raise ValueError(f"{name} shape {shape} does not match intrinsics {hw}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

"""Whole-image rectification by rotation-induced homographies.

``warp_bundle`` resamples a frame bundle into the image a rotated camera
would capture from the same position; the two ``unwarp_*`` operators
transport a prediction made on the rectified image back into the
original frame (divide by the ray z-factor for depth, rotate back for
normals).

The output canvas always equals the input canvas with unchanged
intrinsics.  Content leaving the frustum becomes invalid; nothing is
resized or inpainted.  RGB is bilinearly sampled; depth and normals use
nearest-neighbor so values are never blended across discontinuities
(bilinear with renormalization is available for normals via a flag).
"""

from __future__ import annotations

import numpy as np

from .frames import DepthMap, FrameBundle, NormalMap
from .geometry import CameraIntrinsics, pixel_grid, ray_z_factors, warp_points
from .validation import check_rotation

EPS_FACTOR = 1e-8

__all__ = ["warp_bundle", "unwarp_depth_prediction", "unwarp_normal_prediction"]


def _nearest_indices(uv: np.ndarray, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Round sample points to pixel indices; flag rows that stay in-canvas."""
    with np.errstate(invalid="ignore"):
        ui = np.rint(uv[:, 0])
        vi = np.rint(uv[:, 1])
    ok = (
        np.isfinite(ui) & np.isfinite(vi)
        & (ui >= 0) & (ui <= k.width - 1)
        & (vi >= 0) & (vi <= k.height - 1)
    )
    ui = np.where(ok, ui, 0).astype(np.intp)
    vi = np.where(ok, vi, 0).astype(np.intp)
    return ui, vi, ok


def _masked_bilinear(
    field: np.ndarray, alpha: np.ndarray, uv: np.ndarray, ok: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear sample of an (H, W, C) field honoring a per-pixel alpha mask.

    Corner weights are multiplied by ``alpha`` (and zeroed outside the
    canvas) and the result renormalized, so invalid or out-of-canvas
    pixels never bleed into valid neighborhoods.  Returns the (N, C)
    samples and the total sampled weight per row (0 where nothing valid
    contributed; those rows are zero-filled).
    """
    h, w = field.shape[:2]
    u = np.where(ok, uv[:, 0], -10.0)
    v = np.where(ok, uv[:, 1], -10.0)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    du = u - u0
    dv = v - v0
    acc = np.zeros((uv.shape[0], field.shape[2]))
    wacc = np.zeros(uv.shape[0])
    corners = (
        (u0, v0, (1 - du) * (1 - dv)),
        (u0 + 1, v0, du * (1 - dv)),
        (u0, v0 + 1, (1 - du) * dv),
        (u0 + 1, v0 + 1, du * dv),
    )
    for cu, cv, wgt in corners:
        inb = (cu >= 0) & (cu < w) & (cv >= 0) & (cv < h)
        cui = np.where(inb, cu, 0)
        cvi = np.where(inb, cv, 0)
        a = wgt * inb * alpha[cvi, cui]
        acc += field[cvi, cui] * a[:, None]
        wacc += a
    good = wacc > 1e-12
    acc[good] /= wacc[good, None]
    acc[~good] = 0.0
    return acc, wacc


def warp_bundle(b: FrameBundle, r, normal_interp: str = "nearest") -> FrameBundle:
    """Resample a bundle into the frame of a camera rotated by ``r``.

    For each output pixel the source location is found through the inverse
    rotation; depth values are additionally multiplied by the ray z-factor
    so they express depth in the rotated camera, normals are rotated by
    ``r``, and gravity becomes ``r @ gravity``.  Pixels whose source ray
    leaves the forward hemisphere, falls outside the canvas, or lands on
    an invalid source pixel are invalid in the output.  A fully invalid
    output is permitted.

    Parameters
    ----------
    b : FrameBundle
    r : (3, 3) rotation
    normal_interp : {"nearest", "bilinear"}
        Bilinear blends neighboring normals and renormalizes; nearest
        never mixes values across surface boundaries.
    """
    if normal_interp not in ("nearest", "bilinear"):
        raise ValueError(f"unknown normal_interp {normal_interp!r}")
    r = check_rotation(r)
    k = b.intrinsics
    h, w = k.height, k.width
    grid = pixel_grid(k)
    src, ray_ok = warp_points(grid, k, r.T)

    ui, vi, inb = _nearest_indices(src, k)
    ok = ray_ok & inb

    # depth: nearest sample transported into the rotated camera
    factors = ray_z_factors(src, k, r)
    dvals = np.zeros(grid.shape[0])
    dvalid = np.zeros(grid.shape[0], dtype=bool)
    dvals[ok] = b.depth.values[vi[ok], ui[ok]] * factors[ok]
    dvalid[ok] = b.depth.valid[vi[ok], ui[ok]] & (factors[ok] > EPS_FACTOR)
    depth = DepthMap(dvals.reshape(h, w), dvalid.reshape(h, w), b.depth.d_max)

    # normals: sampled, then rotated into the new frame
    if normal_interp == "bilinear":
        nvecs, _ = _masked_bilinear(
            b.normals.vectors, b.normals.valid.astype(float), src, ray_ok
        )
        nvalid = np.zeros(grid.shape[0], dtype=bool)
        nvalid[ok] = b.normals.valid[vi[ok], ui[ok]]
        nvalid &= np.linalg.norm(nvecs, axis=1) > 1e-6
    else:
        nvecs = np.zeros((grid.shape[0], 3))
        nvalid = np.zeros(grid.shape[0], dtype=bool)
        nvecs[ok] = b.normals.vectors[vi[ok], ui[ok]]
        nvalid[ok] = b.normals.valid[vi[ok], ui[ok]]
    nvecs = nvecs @ r.T
    nvecs[~nvalid] = 0.0
    normals = NormalMap(nvecs.reshape(h, w, 3), nvalid.reshape(h, w))

    # RGB: bilinear, but geometry-invalid pixels carry no trustworthy
    # content, so they are excluded from the blend wherever at least one
    # valid neighbor exists (stops dark halos at validity boundaries).
    # Fully invalid neighborhoods fall back to a plain blend.
    alpha = (b.depth.valid | b.normals.valid).astype(float)
    rgb_src = b.rgb.astype(np.float64)
    rgb_f, wsum = _masked_bilinear(rgb_src, alpha, src, ray_ok)
    plain, _ = _masked_bilinear(rgb_src, np.ones_like(alpha), src, ray_ok)
    rgb_f = np.where((wsum > 1e-12)[:, None], rgb_f, plain)
    rgb = np.clip(np.rint(rgb_f), 0, 255).astype(np.uint8).reshape(h, w, 3)

    return FrameBundle(rgb, depth, normals, r @ b.gravity, k)


def unwarp_depth_prediction(pred_up: DepthMap, k: CameraIntrinsics, r) -> DepthMap:
    """Transport a rectified-frame depth prediction back to the original frame.

    ``r`` must be the rotation that produced the rectified frame.  Each
    original pixel looks up the prediction at its rectified location and
    divides by its own ray z-factor; pixels whose rectified location is
    invalid, out of canvas, or whose factor is non-positive come back
    invalid.
    """
    r = check_rotation(r)
    grid = pixel_grid(k)
    up, ray_ok = warp_points(grid, k, r)
    ui, vi, inb = _nearest_indices(up, k)
    ok = ray_ok & inb

    factors = ray_z_factors(grid, k, r)
    vals = np.zeros(grid.shape[0])
    valid = np.zeros(grid.shape[0], dtype=bool)
    safe = ok & (factors > EPS_FACTOR)
    vals[safe] = pred_up.values[vi[safe], ui[safe]] / factors[safe]
    valid[safe] = pred_up.valid[vi[safe], ui[safe]]
    return DepthMap(
        vals.reshape(k.height, k.width), valid.reshape(k.height, k.width), pred_up.d_max
    )


def unwarp_normal_prediction(pred_up: NormalMap, k: CameraIntrinsics, r) -> NormalMap:
    """Transport a rectified-frame normal prediction back to the original frame.

    Samples the prediction at each original pixel's rectified location and
    rotates it by R^T; unit norm and validity are preserved.
    """
    r = check_rotation(r)
    grid = pixel_grid(k)
    up, ray_ok = warp_points(grid, k, r)
    ui, vi, inb = _nearest_indices(up, k)
    ok = ray_ok & inb

    vecs = np.zeros((grid.shape[0], 3))
    valid = np.zeros(grid.shape[0], dtype=bool)
    vecs[ok] = pred_up.vectors[vi[ok], ui[ok]]
    valid[ok] = pred_up.valid[vi[ok], ui[ok]]
    vecs = vecs @ r  # row convention: this is R^T applied to each vector
    vecs[~valid] = 0.0
    return NormalMap(vecs.reshape(k.height, k.width, 3), valid.reshape(k.height, k.width))

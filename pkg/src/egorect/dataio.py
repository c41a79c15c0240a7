"""Sample serialization, manifests, and normal-map generation from depth.

On-disk conventions
-------------------
depth    16-bit grayscale PNG, millimeters, 0 = invalid
normals  16-bit RGB PNG, linear map [0, 65535] <-> [-1, 1], (0,0,0) = invalid
rgb      8-bit RGB PNG; may be a different resolution than the geometry
         rasters (the geometry size wins, RGB is resampled on load)
sidecar  {frame_id}.json with gravity and intrinsics
manifest JSON-lines, one sample record per line, UTF-8, paths relative
         to the manifest's directory

Depth and normals are the supervision targets, so they are stored
bit-faithfully at their native resolution and never resampled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .exceptions import (
    FileMissing,
    FormatError,
    IntrinsicsMismatch,
    IoError,
)
from .frames import DEFAULT_D_MAX, DepthMap, FrameBundle, NormalMap
from .geometry import CameraIntrinsics

__all__ = [
    "SampleRecord",
    "Manifest",
    "load_sample",
    "write_sample",
    "read_manifest",
    "write_manifest",
    "normals_from_depth",
]

# Gravity stored slightly off unit (quantization, sloppy writers) is
# renormalized; beyond this it is considered corrupt.
_GRAVITY_TOL = 1e-3


def _clean_gravity(g) -> np.ndarray:
    a = np.asarray(g, dtype=np.float64)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise FormatError(f"gravity must be a finite 3-vector, got {g!r}")
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) >= _GRAVITY_TOL:
        raise FormatError(f"gravity norm {n:.6f} too far from 1 to trust")
    return a / n


@dataclass
class SampleRecord:
    """Pointer to one sample on disk plus its per-frame metadata."""

    rgb_path: Path
    depth_path: Path
    normal_path: Path | None
    gravity: np.ndarray
    intrinsics: CameraIntrinsics
    frame_id: str

    def __post_init__(self):
        self.rgb_path = Path(self.rgb_path)
        self.depth_path = Path(self.depth_path)
        self.normal_path = Path(self.normal_path) if self.normal_path is not None else None
        self.gravity = _clean_gravity(self.gravity)
        if not self.frame_id:
            raise ValueError("frame_id must be non-empty")


@dataclass
class Manifest:
    """Ordered collection of sample records with unique frame ids."""

    records: list = field(default_factory=list)
    dataset_name: str = ""

    def __post_init__(self):
        ids = [r.frame_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise FormatError("manifest contains duplicate frame_ids")

    def append(self, record: SampleRecord) -> None:
        if any(r.frame_id == record.frame_id for r in self.records):
            raise FormatError(f"duplicate frame_id {record.frame_id!r} in manifest")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)


def _read_png(path: Path, flags: int) -> np.ndarray:
    if not path.exists():
        raise FileMissing(f"file not found: {path}")
    img = cv2.imread(str(path), flags)
    if img is None:
        raise FormatError(f"could not decode image: {path}")
    return img


def load_sample(rec: SampleRecord, d_max: float = DEFAULT_D_MAX) -> FrameBundle:
    """Load a sample record into a frame bundle.

    The geometry rasters define the working resolution; RGB is resampled
    to it if needed.  Depth zeros and out-of-range values become invalid;
    normal pixels that decode to (near) zero vectors become invalid, the
    rest are renormalized.

    Raises
    ------
    FileMissing, FormatError, IntrinsicsMismatch
    """
    k = rec.intrinsics
    hw = (k.height, k.width)

    raw = _read_png(rec.depth_path, cv2.IMREAD_UNCHANGED)
    if raw.ndim != 2 or raw.dtype != np.uint16:
        raise FormatError(f"depth must be a single-channel 16-bit PNG: {rec.depth_path}")
    if raw.shape != hw:
        raise IntrinsicsMismatch(
            f"depth raster {raw.shape} does not match intrinsics {hw}"
        )
    depth = DepthMap(raw.astype(np.float64) / 1000.0, raw > 0, d_max)

    if rec.normal_path is not None:
        rawn = _read_png(rec.normal_path, cv2.IMREAD_UNCHANGED)
        if rawn.ndim != 3 or rawn.shape[2] != 3 or rawn.dtype != np.uint16:
            raise FormatError(f"normals must be a 3-channel 16-bit PNG: {rec.normal_path}")
        if rawn.shape[:2] != hw:
            raise IntrinsicsMismatch(
                f"normal raster {rawn.shape[:2]} does not match intrinsics {hw}"
            )
        vecs = rawn[:, :, ::-1].astype(np.float64) / 65535.0 * 2.0 - 1.0  # file is RGB
        norms = np.linalg.norm(vecs, axis=2)
        # all-zero raw pixels are the invalid sentinel, not a (-1,-1,-1) normal
        nvalid = (rawn != 0).any(axis=2) & (norms > _GRAVITY_TOL)
        normals = NormalMap(np.where(nvalid[:, :, None], vecs, 0.0), nvalid)
    else:
        normals = NormalMap(np.zeros((*hw, 3)), np.zeros(hw, dtype=bool))

    rgb = _read_png(rec.rgb_path, cv2.IMREAD_COLOR)[:, :, ::-1]
    if rgb.shape[:2] != hw:
        rgb = cv2.resize(rgb, (k.width, k.height), interpolation=cv2.INTER_AREA)

    return FrameBundle(np.ascontiguousarray(rgb), depth, normals, rec.gravity, k)


def write_sample(b: FrameBundle, out_dir, frame_id: str) -> SampleRecord:
    """Write a bundle's rasters plus sidecar; inverse of load up to quantization.

    Depth is stored in integer millimeters (valid sub-millimeter depths
    are clamped up to 1 mm so they stay distinguishable from the invalid
    sentinel 0); normals are stored per component in 16 bits.

    Raises
    ------
    IoError
        If any file cannot be written.
    """
    if not frame_id or any(c in frame_id for c in "/\\"):
        raise ValueError(f"frame_id must be a plain name, got {frame_id!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    mm = np.rint(b.depth.values * 1000.0).clip(0, 65535).astype(np.uint16)
    mm = np.where(b.depth.valid, np.maximum(mm, 1), 0).astype(np.uint16)

    q = np.rint((b.normals.vectors + 1.0) / 2.0 * 65535.0).clip(0, 65535).astype(np.uint16)
    q = np.where(b.normals.valid[:, :, None], q, 0).astype(np.uint16)

    paths = {
        "rgb": out / f"{frame_id}_rgb.png",
        "depth": out / f"{frame_id}_depth.png",
        "normal": out / f"{frame_id}_normal.png",
    }
    writes = [
        (paths["rgb"], b.rgb[:, :, ::-1]),       # cv2 wants BGR; file is RGB
        (paths["depth"], mm),
        (paths["normal"], q[:, :, ::-1]),
    ]
    for path, data in writes:
        if not cv2.imwrite(str(path), np.ascontiguousarray(data)):
            raise IoError(f"failed to write {path}")

    k = b.intrinsics
    sidecar = {
        "gravity": [float(x) for x in b.gravity],
        "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
        "width": k.width, "height": k.height,
    }
    try:
        (out / f"{frame_id}.json").write_text(
            json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoError(f"failed to write sidecar for {frame_id}: {exc}") from exc

    return SampleRecord(
        rgb_path=paths["rgb"],
        depth_path=paths["depth"],
        normal_path=paths["normal"],
        gravity=b.gravity,
        intrinsics=k,
        frame_id=frame_id,
    )


def _record_to_doc(rec: SampleRecord, base: Path) -> dict:
    def rel(p: Path | None):
        if p is None:
            return None
        rp = Path(p).resolve()  # base is resolved, so relative inputs must be too
        try:
            return str(rp.relative_to(base))
        except ValueError:
            return str(rp)

    k = rec.intrinsics
    return {
        "frame_id": rec.frame_id,
        "rgb_path": rel(rec.rgb_path),
        "depth_path": rel(rec.depth_path),
        "normal_path": rel(rec.normal_path),
        "gravity": [float(x) for x in rec.gravity],
        "intrinsics": {
            "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "width": k.width, "height": k.height,
        },
    }


def write_manifest(records, path) -> None:
    """Write records as JSON-lines; raster paths become relative to the manifest."""
    path = Path(path)
    Manifest(list(records))  # enforce unique frame_ids before touching disk
    base = path.parent.resolve()
    lines = [
        json.dumps(_record_to_doc(r, base), sort_keys=True) for r in records
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_manifest(path) -> Manifest:
    """Read a JSON-lines manifest; record order is preserved.

    Raises
    ------
    FileMissing
        If the manifest itself does not exist.
    FormatError
        On malformed lines or duplicate frame ids.
    """
    path = Path(path)
    if not path.exists():
        raise FileMissing(f"manifest not found: {path}")
    base = path.parent
    records = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            ki = doc["intrinsics"]
            intr = CameraIntrinsics(
                fx=float(ki["fx"]), fy=float(ki["fy"]),
                cx=float(ki["cx"]), cy=float(ki["cy"]),
                width=int(ki["width"]), height=int(ki["height"]),
            )
            rec = SampleRecord(
                rgb_path=base / doc["rgb_path"],
                depth_path=base / doc["depth_path"],
                normal_path=(base / doc["normal_path"]) if doc.get("normal_path") else None,
                gravity=doc["gravity"],
                intrinsics=intr,
                frame_id=str(doc["frame_id"]),
            )
        except FormatError:
            raise
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad manifest line {ln} in {path}: {exc}") from exc
        records.append(rec)
    return Manifest(records, dataset_name=path.stem)


def normals_from_depth(
    d: DepthMap,
    k: CameraIntrinsics,
    window: int = 5,
    rel_threshold: float = 0.05,
    min_points: int = 6,
) -> NormalMap:
    """Estimate surface normals from depth by local plane fitting.

    Each pixel's window x window neighborhood is back-projected to 3D;
    neighbors whose depth differs from the center by more than
    ``rel_threshold`` (relative) are dropped as discontinuities; the
    plane normal is the smallest-eigenvalue eigenvector of the centered
    covariance, oriented toward the camera.  Pixels with fewer than
    ``min_points`` usable neighbors, or a degenerate covariance, are
    invalid.  Never raises: invalidity is per-pixel.
    """
    if window % 2 != 1 or window < 3:
        raise ValueError("window must be an odd integer >= 3")
    h, w = d.shape
    half = window // 2

    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    x = (u - k.cx) / k.fx
    y = (v - k.cy) / k.fy
    pts = np.stack([x * d.values, y * d.values, d.values], axis=2)
    # work relative to each center point: better conditioned covariance
    pad_pts = np.pad(pts, ((half, half), (half, half), (0, 0)))
    pad_d = np.pad(d.values, half)
    pad_ok = np.pad(d.valid, half)

    count = np.zeros((h, w))
    s1 = np.zeros((h, w, 3))
    s2 = np.zeros((h, w, 3, 3))
    center_d = d.values
    for dy in range(window):
        for dx in range(window):
            nb_pts = pad_pts[dy : dy + h, dx : dx + w] - pts
            nb_d = pad_d[dy : dy + h, dx : dx + w]
            use = (
                pad_ok[dy : dy + h, dx : dx + w]
                & d.valid
                & (np.abs(nb_d - center_d) <= rel_threshold * center_d)
            )
            uf = use.astype(np.float64)
            count += uf
            s1 += nb_pts * uf[:, :, None]
            s2 += nb_pts[:, :, :, None] * nb_pts[:, :, None, :] * uf[:, :, None, None]

    fit = d.valid & (count >= min_points)
    vectors = np.zeros((h, w, 3))
    if fit.any():
        m = count[fit][:, None, None]
        mu = s1[fit] / count[fit][:, None]
        cov = s2[fit] / m - mu[:, :, None] * mu[:, None, :]
        evals, evecs = np.linalg.eigh(cov)
        normals = evecs[:, :, 0]  # eigenvector of the smallest eigenvalue
        # degenerate neighborhoods (collinear points) have a flat second mode
        nondeg = evals[:, 1] > 1e-14
        rays = np.stack([x[fit], y[fit], np.ones(fit.sum())], axis=1)
        flip = np.einsum("ij,ij->i", normals, rays) > 0
        normals[flip] *= -1.0
        normals[~nondeg] = 0.0
        vectors[fit] = normals
        ok = np.zeros((h, w), dtype=bool)
        ok[fit] = nondeg
        fit = ok
    return NormalMap(vectors, fit)

"""Angular histograms of surface normals and KL-based rotation refinement.

Normals are binned on a fixed partition of the unit sphere; per-cluster
reference distributions, KL divergence between histograms, and a
deterministic search for the rotation that best aligns a frame's normal
distribution with its cluster's all live here.

Binning scheme
--------------
The default scheme subdivides the icosahedron twice (each edge midpoint
projected back onto the sphere at every level) and uses the normalized
centroid of each of the 320 resulting faces as a bin center.  A vector
is assigned to the center with the largest dot product.  The cells are
deterministic and near-equal-area, but not exactly equal (solid angles
spread about +-10% around the mean), so tests against expected bin
occupancy must use per-bin cell areas, not 1/B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .exceptions import EmptySample, SchemeMismatch
from .validation import check_rotation, unit_vectors

# Laplace smoothing added per bin before KL so empty bins stay finite.
KL_SMOOTHING = 1e-6

# Pieces drawn per chunk when assigning large normal sets to bins.
_CHUNK = 65536

__all__ = [
    "SphereHistogram",
    "NormalSample",
    "register_scheme",
    "scheme_centers",
    "angular_resolution_deg",
    "assign_bins",
    "build_histogram",
    "cluster_distribution",
    "kl_divergence",
    "refine_rotation_kl",
    "principal_direction",
    "DEFAULT_SCHEME",
]

DEFAULT_SCHEME = "icosphere-l2"

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    v = np.array(
        [
            [-1, _GOLDEN, 0], [1, _GOLDEN, 0], [-1, -_GOLDEN, 0], [1, -_GOLDEN, 0],
            [0, -1, _GOLDEN], [0, 1, _GOLDEN], [0, -1, -_GOLDEN], [0, 1, -_GOLDEN],
            [_GOLDEN, 0, -1], [_GOLDEN, 0, 1], [-_GOLDEN, 0, -1], [-_GOLDEN, 0, 1],
        ],
        dtype=np.float64,
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.intp,
    )
    return v, f


def _icosphere_centers(level: int) -> np.ndarray:
    """Bin centers of the level-times-subdivided icosahedron.

    Each subdivision splits every face into four by its edge midpoints,
    projected back onto the sphere; midpoints are cached by vertex-index
    pair so shared edges stay shared exactly.
    """
    verts, faces = _icosahedron()
    verts = list(verts)
    faces = [tuple(f) for f in faces]
    for _ in range(level):
        midpoint_of: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in midpoint_of:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint_of[key] = len(verts) - 1
            return midpoint_of[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = nxt
    v = np.array(verts)
    centers = v[np.array(faces)].mean(axis=1)
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers.setflags(write=False)
    return centers


_SCHEMES: dict[str, np.ndarray] = {DEFAULT_SCHEME: _icosphere_centers(2)}


def register_scheme(scheme_id: str, centers) -> None:
    """Register a custom binning scheme under ``scheme_id``.

    Mainly useful for tests that need tiny hand-checkable bin layouts.
    Re-registering an existing id with different centers raises.
    """
    c = unit_vectors(centers, "centers")
    if scheme_id in _SCHEMES:
        if _SCHEMES[scheme_id].shape == c.shape and np.allclose(_SCHEMES[scheme_id], c):
            return
        raise ValueError(f"scheme {scheme_id!r} already registered with different centers")
    c.setflags(write=False)
    _SCHEMES[scheme_id] = c


def scheme_centers(scheme_id: str) -> np.ndarray:
    """Bin centers of a registered scheme, shape (B, 3), read-only."""
    try:
        return _SCHEMES[scheme_id]
    except KeyError:
        raise SchemeMismatch(f"unknown binning scheme {scheme_id!r}") from None


def angular_resolution_deg(scheme_id: str = DEFAULT_SCHEME) -> float:
    """Covering radius of the scheme in degrees.

    Upper bound on how far any direction can lie from its bin center;
    serves as the resolution limit quoted for rotation refinement.
    """
    c = scheme_centers(scheme_id)
    # sample the sphere densely and take the worst nearest-center angle
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200_000, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    worst = 0.0
    for lo in range(0, x.shape[0], _CHUNK):
        best = (x[lo : lo + _CHUNK] @ c.T).max(axis=1)
        worst = max(worst, float(np.degrees(np.arccos(np.clip(best, -1.0, 1.0))).max()))
    return worst


@dataclass
class NormalSample:
    """Unit surface normals of one frame's valid pixels.

    May be empty as a container; operations that need data raise
    EmptySample themselves.
    """

    normals: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        a = np.asarray(self.normals, dtype=np.float64)
        if a.size == 0:
            self.normals = a.reshape(0, 3)
            return
        self.normals = unit_vectors(a, "normals")

    def __len__(self) -> int:
        return self.normals.shape[0]

    def rotated(self, r) -> "NormalSample":
        """Sample with every normal rotated by ``r``."""
        r = np.asarray(r, dtype=np.float64)
        return NormalSample(self.normals @ r.T, self.source_id)


@dataclass
class SphereHistogram:
    """Normalized angular distribution over a binning scheme's cells."""

    mass: np.ndarray
    scheme_id: str = DEFAULT_SCHEME

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64).ravel()
        centers = scheme_centers(self.scheme_id)
        if m.shape[0] != centers.shape[0]:
            raise ValueError(
                f"mass has {m.shape[0]} bins, scheme {self.scheme_id!r} has {centers.shape[0]}"
            )
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("mass must be finite and non-negative")
        total = m.sum()
        if total <= 0:
            raise ValueError("mass must have positive total")
        self.mass = m / total

    @property
    def bin_centers(self) -> np.ndarray:
        return scheme_centers(self.scheme_id)

    def __len__(self) -> int:
        return self.mass.shape[0]


def assign_bins(normals: np.ndarray, scheme_id: str = DEFAULT_SCHEME) -> np.ndarray:
    """Bin index (nearest center by dot product) for each unit normal."""
    c = scheme_centers(scheme_id)
    n = np.asarray(normals, dtype=np.float64)
    out = np.empty(n.shape[0], dtype=np.intp)
    for lo in range(0, n.shape[0], _CHUNK):
        out[lo : lo + _CHUNK] = np.argmax(n[lo : lo + _CHUNK] @ c.T, axis=1)
    return out


def build_histogram(s: NormalSample, scheme_id: str = DEFAULT_SCHEME) -> SphereHistogram:
    """Histogram of a frame's normals, normalized to unit total mass.

    Raises
    ------
    EmptySample
        If the sample holds no normals.
    """
    if len(s) == 0:
        raise EmptySample(f"cannot build a histogram from empty sample {s.source_id!r}")
    c = scheme_centers(scheme_id)
    counts = np.zeros(c.shape[0], dtype=np.float64)
    idx = assign_bins(s.normals, scheme_id)
    np.add.at(counts, idx, 1.0)
    return SphereHistogram(counts, scheme_id)


def cluster_distribution(
    samples: list[NormalSample], scheme_id: str = DEFAULT_SCHEME
) -> SphereHistogram:
    """Mean of the per-frame histograms of a cluster's samples.

    Raises
    ------
    EmptySample
        If the list is empty or any member sample is empty.
    """
    if not samples:
        raise EmptySample("cluster_distribution needs at least one sample")
    acc = np.zeros(scheme_centers(scheme_id).shape[0], dtype=np.float64)
    for s in samples:
        acc += build_histogram(s, scheme_id).mass
    return SphereHistogram(acc / len(samples), scheme_id)


def kl_divergence(
    p: SphereHistogram, q: SphereHistogram, smoothing: float = KL_SMOOTHING
) -> float:
    """KL divergence D(p || q) in nats between two histograms.

    Both histograms receive ``smoothing`` additional mass per bin and are
    renormalized first, which keeps the divergence finite when q has
    empty bins.  Pass ``smoothing=0`` only when q is known to be strictly
    positive wherever p is.

    Raises
    ------
    SchemeMismatch
        If the histograms use different binning schemes.
    """
    if p.scheme_id != q.scheme_id:
        raise SchemeMismatch(f"cannot compare schemes {p.scheme_id!r} and {q.scheme_id!r}")
    pm = p.mass + smoothing
    qm = q.mass + smoothing
    pm = pm / pm.sum()
    qm = qm / qm.sum()
    pos = pm > 0
    return float(np.sum(pm[pos] * np.log(pm[pos] / qm[pos])))


def _exp_so3(omega: np.ndarray) -> np.ndarray:
    # Rodrigues formula on an unnormalized rotation vector
    angle = float(np.linalg.norm(omega))
    if angle < 1e-15:
        return np.eye(3)
    a = omega / angle
    kx = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


# Multi-resolution grid: (half-width in degrees, samples per axis) per stage.
_REFINE_STAGES = ((15.0, 7), (5.0, 7), (1.5, 7))


def refine_rotation_kl(
    s: NormalSample,
    q: SphereHistogram,
    r_init,
    stages=_REFINE_STAGES,
) -> np.ndarray:
    """Rotation minimizing the KL divergence of the rotated sample to ``q``.

    The objective KL(hist(R n) || q) is piecewise constant in R because of
    the binning, so the search is a deterministic multi-resolution grid
    over axis-angle perturbations exp([dw]x) R, each stage centered on the
    previous stage's best.  The zero perturbation is always a candidate,
    which guarantees the result never scores worse than ``r_init``.  Ties
    are broken toward the lexicographically smallest perturbation.

    Raises
    ------
    EmptySample
        If the sample is empty.
    """
    if len(s) == 0:
        raise EmptySample("cannot refine a rotation against an empty sample")
    r_center = check_rotation(r_init, "r_init")

    def objective(rot: np.ndarray) -> float:
        return kl_divergence(build_histogram(s.rotated(rot), q.scheme_id), q)

    best_rot = r_center
    best_val = objective(r_center)
    for half_width_deg, n_axis in stages:
        offsets = np.linspace(
            -math.radians(half_width_deg), math.radians(half_width_deg), n_axis
        )
        stage_center = best_rot
        for dw in product(offsets, repeat=3):
            cand = _exp_so3(np.array(dw)) @ stage_center
            val = objective(cand)
            if val < best_val:
                best_val = val
                best_rot = cand
    return best_rot


def principal_direction(r_star, g) -> np.ndarray:
    """Image of gravity under the refined rotation, e = R* g (unit norm)."""
    r = np.asarray(r_star, dtype=np.float64)
    e = r @ np.asarray(g, dtype=np.float64)
    return e / np.linalg.norm(e)

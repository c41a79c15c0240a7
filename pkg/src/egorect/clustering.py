"""Reference-direction clustering of gravity vectors.

K-medoids keeps cluster centers on the unit sphere because medoids are
input points; the reference-direction search increments K until the mean
squared chordal deviation of the clustering drops below a threshold.

The deviation threshold is interpreted as a MEAN over samples rather than
a raw sum: a sum grows with dataset size, which would make any fixed
threshold meaningless across datasets of different sizes.

The PAM routine is deterministic: farthest-point initialization from a
seeded start index, then best-improvement swaps with ties broken in scan
order.  Identical inputs and seed always produce identical medoids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateInput, EmptyInput
from .validation import unit_vectors

__all__ = [
    "ReferenceSet",
    "k_medoids",
    "cluster_references",
    "save_reference_set",
    "load_reference_set",
    "ReferenceDirectionClustering",
]

# ReferenceSet directions must be pairwise separated by more than this.
_MIN_SEPARATION_DEG = 1.0


@dataclass
class ReferenceSet:
    """The clustered reference directions r_i, with optional extras.

    ``per_mode_q`` may hold one normal-distribution histogram per mode;
    ``delta`` and ``seed`` record how the set was produced so it can be
    serialized reproducibly.
    """

    directions: np.ndarray
    per_mode_q: list | None = None
    delta: float | None = None
    seed: int = 0

    def __post_init__(self):
        self.directions = unit_vectors(self.directions, "directions")
        if self.directions.shape[0] < 1:
            raise EmptyInput("a reference set needs at least one direction")
        dots = np.clip(self.directions @ self.directions.T, -1.0, 1.0)
        np.fill_diagonal(dots, -1.0)
        min_angle = np.degrees(np.arccos(dots.max())) if len(self) > 1 else np.inf
        if min_angle <= _MIN_SEPARATION_DEG:
            raise DegenerateInput(
                f"reference directions must be > {_MIN_SEPARATION_DEG} deg apart "
                f"(closest pair: {min_angle:.3f} deg)"
            )
        if self.per_mode_q is not None and len(self.per_mode_q) != len(self):
            raise ValueError("per_mode_q must have one histogram per direction")

    def __len__(self) -> int:
        return self.directions.shape[0]


def _clustering_cost(dist: np.ndarray, medoids: list[int]) -> float:
    return float(dist[:, medoids].min(axis=1).sum())


def _farthest_point_init(dist: np.ndarray, k: int, start: int) -> list[int]:
    medoids = [start]
    while len(medoids) < k:
        d = dist[:, medoids].min(axis=1)
        medoids.append(int(np.argmax(d)))  # ties: lowest index wins
    return medoids


def _pam_descent(dist: np.ndarray, k: int, start: int) -> tuple[list[int], float]:
    """Greedy best-improvement swap descent from a farthest-point init."""
    n = dist.shape[0]
    medoids = _farthest_point_init(dist, k, start)
    cost = _clustering_cost(dist, medoids)
    improved = True
    while improved:
        improved = False
        best_cost, best_swap = cost, None
        in_set = np.zeros(n, dtype=bool)
        in_set[medoids] = True
        for i in range(k):
            others = [m for j, m in enumerate(medoids) if j != i]
            partial = dist[:, others].min(axis=1) if others else np.full(n, np.inf)
            for c in range(n):
                if in_set[c]:
                    continue
                new_cost = float(np.minimum(partial, dist[:, c]).sum())
                if new_cost < best_cost:
                    best_cost, best_swap = new_cost, (i, c)
        if best_swap is not None:
            medoids[best_swap[0]] = best_swap[1]
            cost = best_cost
            improved = True
    return sorted(medoids), cost


_MULTISTART_LIMIT = 24


def k_medoids(dist: np.ndarray, k: int, seed: int = 0) -> tuple[list[int], float]:
    """Deterministic PAM k-medoids on a precomputed distance matrix.

    Swap descent is restarted from every point when N <= 24 (from the
    single point ``seed % N`` otherwise), and the winner is polished by
    accepting swaps that keep the cost but shrink the sorted medoid list
    lexicographically.  On small inputs this reliably reaches the global
    optimum with a canonical medoid choice, so equally costly solutions
    (e.g. either member of a two-point cluster) always resolve the same
    way.

    Parameters
    ----------
    dist : ndarray of shape (N, N)
        Pairwise distances (any non-negative dissimilarity).
    k : int
        Number of medoids, 1 <= k <= N.
    seed : int
        Start medoid for large inputs; ignored when N <= 24.

    Returns
    -------
    medoids : list of int, sorted ascending
    cost : float
        Sum over points of the distance to the nearest medoid.
    """
    n = dist.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    starts = range(n) if n <= _MULTISTART_LIMIT else [seed % n]
    cost, medoids = min(
        ((c, m) for m, c in (_pam_descent(dist, k, s) for s in starts)),
        key=lambda t: (t[0], t[1]),
    )

    # canonicalization: keep swapping while (cost, medoid list) decreases
    while True:
        best_move = (cost, medoids)
        in_set = np.zeros(n, dtype=bool)
        in_set[medoids] = True
        for i in range(k):
            others = [m for j, m in enumerate(medoids) if j != i]
            partial = dist[:, others].min(axis=1) if others else np.full(n, np.inf)
            for c in range(n):
                if in_set[c]:
                    continue
                new_cost = float(np.minimum(partial, dist[:, c]).sum())
                cand = (new_cost, sorted(others + [c]))
                if cand < best_move:
                    best_move = cand
        if best_move == (cost, medoids):
            return medoids, cost
        cost, medoids = best_move


def cluster_references(gravities, delta: float, seed: int = 0) -> ReferenceSet:
    """Smallest-K k-medoids clustering of gravity directions.

    Starting from K = 1, K is incremented until the mean squared chordal
    deviation (1/N) sum_i sum_{j in C_i} ||g_j - r_i||^2 falls to
    ``delta`` or below.  Medoids are input points and therefore unit.

    Parameters
    ----------
    gravities : array-like of shape (N, 3)
        Gravity directions; rows are normalized on entry.
    delta : float
        Mean squared deviation threshold, > 0.
    seed : int
        Start-index seed for the deterministic PAM initializer.

    Raises
    ------
    EmptyInput
        If no gravity vectors are given.
    """
    g = np.asarray(gravities, dtype=np.float64)
    if g.size == 0:
        raise EmptyInput("cluster_references needs at least one gravity direction")
    g = unit_vectors(g, "gravities")
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = g.shape[0]
    # squared chordal distance ||a - b||^2 = 2 - 2 a.b
    dist = np.clip(2.0 - 2.0 * (g @ g.T), 0.0, None)

    for k in range(1, n + 1):
        medoids, cost = k_medoids(dist, k, seed)
        if cost / n <= delta:
            return ReferenceSet(g[medoids], delta=delta, seed=seed)
    # unreachable: at k = n every point is its own medoid and cost is 0
    raise AssertionError("k-medoids failed to reach zero cost at k = n")


def save_reference_set(refs: ReferenceSet, path) -> None:
    """Write a reference set as JSON: {"directions": [...], "delta": ..., "seed": ...}."""
    doc = {
        "directions": [list(map(float, d)) for d in refs.directions],
        "delta": refs.delta,
        "seed": refs.seed,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_reference_set(path) -> ReferenceSet:
    """Read a reference set written by :func:`save_reference_set`."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ReferenceSet(
        np.asarray(doc["directions"], dtype=np.float64),
        delta=doc.get("delta"),
        seed=doc.get("seed", 0),
    )


class ReferenceDirectionClustering(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`cluster_references`.

    Follows the scikit-learn clustering API: ``fit`` learns the reference
    directions from an (N, 3) array of gravity vectors, ``predict`` maps
    directions to their nearest mode index.

    Parameters
    ----------
    delta : float
        Mean squared chordal deviation threshold that stops the K search.
    seed : int
        Seed for the deterministic medoid initialization.

    Attributes
    ----------
    reference_set_ : ReferenceSet
    directions_ : ndarray of shape (K, 3)
    labels_ : ndarray of shape (N,)
        Mode index of each training sample.
    n_clusters_ : int
    """

    def __init__(self, delta: float = 0.0681, seed: int = 0):
        self.delta = delta
        self.seed = seed

    def fit(self, X, y=None):
        X = unit_vectors(np.asarray(X, dtype=np.float64), "X")
        self.reference_set_ = cluster_references(X, self.delta, self.seed)
        self.directions_ = self.reference_set_.directions
        self.labels_ = self.predict(X)
        self.n_clusters_ = len(self.reference_set_)
        return self

    def predict(self, X):
        check_is_fitted(self, "directions_")
        X = unit_vectors(np.asarray(X, dtype=np.float64), "X")
        d2 = 2.0 - 2.0 * (X @ self.directions_.T)
        return np.argmin(d2, axis=1)

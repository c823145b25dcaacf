"""Seeded k-means (k-means++ init, Lloyd iterations) and centroid queries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

MAX_ITER = 100
REL_TOL = 1e-4


@dataclass
class ClusterModel:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    distances: np.ndarray = field(repr=False)
    inertia_history: list[float] = field(default_factory=list, repr=False)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)


def _check_points(points) -> np.ndarray:
    x = np.ascontiguousarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be an n x d matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("points contain non-finite values")
    return x


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator, kern, n_threads: int) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    _, closest = kern.assign_labels(x, x[chosen], n_threads)
    for _ in range(1, k):
        total = kern.sequential_sum(closest)
        if total > 0:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r, side="right"))
            idx = min(idx, n - 1)
        else:
            # every point coincides with a chosen center
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        _, d_new = kern.assign_labels(x, x[idx:idx + 1], n_threads)
        closest = np.minimum(closest, d_new)
    return x[chosen].copy()


def _fill_empty(x, centers, labels, dist, k):
    """Move the farthest point of a multi-member cluster into each empty
    cluster and put that cluster's centroid on it."""
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        # largest distance first, lowest index on ties
        cand = np.flatnonzero(movable)
        p = int(cand[np.lexsort((cand, -dist[cand]))[0]])
        counts[labels[p]] -= 1
        labels[p] = c
        counts[c] += 1
        dist[p] = 0.0
        centers[c] = x[p]
    return counts


def _assign(x, centers, k, kern, n_threads):
    """Assignment step that leaves no cluster empty."""
    labels, dist = kern.assign_labels(x, centers, n_threads)
    for _ in range(k):
        if np.bincount(labels, minlength=k).min() > 0:
            return labels, dist
        _fill_empty(x, centers, labels, dist, k)
        labels, dist = kern.assign_labels(x, centers, n_threads)
    # coincident centers can keep stealing members back; fix without reassigning
    if np.bincount(labels, minlength=k).min() == 0:
        labels = labels.copy()
        dist = dist.copy()
        _fill_empty(x, centers, labels, dist, k)
    return labels, dist


def kmeans(points, k: int, seed: int, *, max_iter: int = MAX_ITER, tol: float = REL_TOL,
           n_threads: int = 1, backend: str | None = None) -> ClusterModel:
    x = _check_points(points)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    kern = kernels.get_backend(backend)
    rng = np.random.default_rng(seed)

    centers = np.ascontiguousarray(_kmeans_pp(x, k, rng, kern, n_threads))
    labels, dist = _assign(x, centers, k, kern, n_threads)
    inertia = kern.sequential_sum(dist)
    history = [inertia]
    it = 0
    while it < max_iter and inertia > 0.0:
        it += 1
        sums, counts = kern.centroid_sums(x, labels, k)
        new_centers = np.ascontiguousarray(sums / counts[:, None])
        new_labels, new_dist = _assign(x, new_centers, k, kern, n_threads)
        new_inertia = kern.sequential_sum(new_dist)
        if __debug__:
            assert new_inertia <= inertia * (1.0 + 1e-12), "k-means inertia increased"
        history.append(new_inertia)
        improved = inertia - new_inertia
        centers, labels, dist, inertia = new_centers, new_labels, new_dist, new_inertia
        if improved < tol * history[-2]:
            break
    return ClusterModel(centers, labels, inertia, dist, history, it)


def nearest_to_centroids(model: ClusterModel, points=None) -> list[int]:
    """Per cluster, the member closest to its centroid (lowest index on ties)."""
    if points is None:
        dist = model.distances
    else:
        x = _check_points(points)
        diff = x - model.centroids[model.assignment]
        dist = np.zeros(x.shape[0])
        for j in range(x.shape[1]):
            dist += diff[:, j] * diff[:, j]
    out = []
    for c in range(model.k):
        members = model.members(c)
        out.append(int(members[np.lexsort((members, dist[members]))[0]]))
    return out

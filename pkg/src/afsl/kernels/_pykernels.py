"""Pure numpy k-means kernels.

Reference backend, and the fallback when the compiled extension is not
built. Accumulation order matches ``_ckernels.pyx`` exactly: distances sum
dimension by dimension, centroid sums and inertia sum point by point.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def _assign_block(points: np.ndarray, centers: np.ndarray):
    n, d = points.shape
    dist = np.zeros((n, centers.shape[0]), dtype=np.float64)
    for j in range(d):
        diff = points[:, j, None] - centers[None, :, j]
        dist += diff * diff
    # argmin returns the first minimum, i.e. the lowest center id on ties
    labels = np.argmin(dist, axis=1).astype(np.int64)
    return labels, dist[np.arange(n), labels]


def assign_labels(points: np.ndarray, centers: np.ndarray, n_threads: int = 1):
    n = points.shape[0]
    if n_threads <= 1 or n < 2 * n_threads:
        return _assign_block(points, centers)
    bounds = np.linspace(0, n, n_threads + 1).astype(int)
    blocks = [(bounds[i], bounds[i + 1]) for i in range(n_threads)]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        parts = list(pool.map(lambda b: _assign_block(points[b[0]:b[1]], centers), blocks))
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]))


def centroid_sums(points: np.ndarray, labels: np.ndarray, k: int):
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    # ufunc.at is unbuffered and applies updates in index order
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def sequential_sum(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    return float(np.cumsum(values)[-1])

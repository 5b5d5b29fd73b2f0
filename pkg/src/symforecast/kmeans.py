"""Lloyd's k-means with k-means++ seeding.

Small and dependency-free on purpose: digitisation calls it once per candidate
alphabet size on a few hundred points at most.
"""

from __future__ import annotations

import numpy as np


def kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # every point already coincides with a center
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _assign(X, centers):
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    centers = centers.copy()
    k = centers.shape[0]
    labels, dist = _assign(X, centers)
    for _ in range(max_iter):
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-fitted point
                far = int(np.argmax(dist))
                centers[j] = X[far]
                dist[far] = 0.0
        new_labels, dist = _assign(X, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centers, float(dist.sum())


def kmeans(X, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300):
    """Cluster the rows of ``X`` into ``k`` groups.

    Returns ``(labels, centers, inertia)`` of the best of ``n_init`` seeded runs.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, centers, inertia = lloyd(X, kmeanspp_init(X, k, rng), max_iter)
        if best is None or inertia < best[2] - 1e-12 * max(1.0, best[2]):
            best = (labels, centers, inertia)
    return best

"""k-means (Lloyd iterations, k-means++ seeding) over normalized patch vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray
    assignments: np.ndarray
    n_iter: int = 0
    inertia_history: tuple = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == c)


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centroids.T + (centroids * centroids).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _nearest(x: np.ndarray, centroids: np.ndarray, chunk: int = 16384) -> tuple[np.ndarray, np.ndarray]:
    labels = np.empty(len(x), dtype=np.int64)
    best = np.empty(len(x))
    for s in range(0, len(x), chunk):
        d = _sq_dists(x[s:s + chunk], centroids)
        labels[s:s + chunk] = np.argmin(d, axis=1)
        best[s:s + chunk] = d[np.arange(len(d)), labels[s:s + chunk]]
    return labels, best


def count_distinct(x: np.ndarray) -> int:
    return len(np.unique(np.ascontiguousarray(x), axis=0))


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(len(x))]
    d2 = ((x - centroids[0]) ** 2).sum(1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, len(x) - 1)
        else:
            idx = int(rng.integers(len(x)))
        centroids[c] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[c]) ** 2).sum(1))
    return centroids


def _reseed_empty(x, labels, dist, centroids) -> bool:
    """Move each empty centroid onto the point farthest from its own centroid."""
    counts = np.bincount(labels, minlength=len(centroids))
    changed = False
    for c in np.flatnonzero(counts == 0):
        # only take points from clusters that can spare one
        donors = counts[labels] > 1
        if not donors.any():
            break
        far = int(np.argmax(np.where(donors, dist, -1.0)))
        counts[labels[far]] -= 1
        counts[c] += 1
        labels[far] = c
        dist[far] = 0.0
        centroids[c] = x[far]
        changed = True
    return changed


def kmeans(vectors, k: int = 5, seed: int = 0, max_iter: int = 100, tol: float = 1e-4) -> ClusterModel:
    """Cluster ``vectors`` into ``k`` groups.

    Stops once the largest centroid displacement drops below ``tol`` or after
    ``max_iter`` Lloyd iterations. Raises ValueError when there are fewer
    distinct vectors than ``k`` (no non-empty k-partition exists).
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    if k < 1 or max_iter < 1 or not tol > 0:
        raise ValueError("need k >= 1, max_iter >= 1, tol > 0")
    if len(x) < k:
        raise ValueError(f"{len(x)} vectors cannot form {k} clusters")
    if k > 1 and count_distinct(x) < k:
        raise ValueError(f"fewer than {k} distinct vectors")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, dist = _nearest(x, centroids)
        _reseed_empty(x, labels, dist, centroids)
        history.append(float(dist.sum()))
        new = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
        shift = np.sqrt(((new - centroids) ** 2).sum(1)).max()
        centroids = new
        if shift < tol:
            break

    labels, dist = _nearest(x, centroids)
    for _ in range(k):
        if not _reseed_empty(x, labels, dist, centroids):
            break
        labels, dist = _nearest(x, centroids)
    return ClusterModel(centroids, labels, n_iter, tuple(history))


def assign(model: ClusterModel, vector) -> int:
    """Index of the nearest centroid; ties go to the lowest index."""
    v = np.asarray(vector, dtype=np.float64)
    if v.shape != model.centroids.shape[1:]:
        raise ValueError(f"expected vector of length {model.centroids.shape[1]}, got {v.shape}")
    d = ((model.centroids - v) ** 2).sum(1)
    return int(np.argmin(d))

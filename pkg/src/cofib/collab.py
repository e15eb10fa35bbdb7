"""Collaborative re-estimation of activity probabilities among similar patches of one cluster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictlearn import Dictionary
from .sparsebayes import SparseBatch, bmp_batch

DISTANCE_FLOOR = 1e-8
SELF_WEIGHT = 0.5


@dataclass(frozen=True)
class CollabGroup:
    patch_index: int
    neighbor_indices: np.ndarray
    distances: np.ndarray
    weights: np.ndarray


def nearest_patches(cluster_vectors, p: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """The t-1 vectors closest to vector ``p`` (itself excluded), ties to the lower index."""
    x = np.asarray(cluster_vectors, dtype=np.float64)
    if t < 1:
        raise ValueError("t must be >= 1")
    if t > len(x):
        raise ValueError(f"t={t} exceeds cluster size {len(x)}")
    d = np.sqrt(((x - x[p]) ** 2).sum(1))
    others = np.delete(np.arange(len(x)), p)
    order = others[np.lexsort((others, d[others]))][:t - 1]
    return order, d[order]


def neighbor_table(cluster_vectors, t: int, chunk: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """:func:`nearest_patches` for every member at once; returns (N, t-1) indices and distances.

    Candidates are shortlisted with the expanded-norm distance and re-ranked
    on exact distances so ties resolve the same way as the single-patch query.
    """
    x = np.asarray(cluster_vectors, dtype=np.float64)
    N = len(x)
    if t < 1 or t > N:
        raise ValueError(f"t={t} must lie in [1, {N}]")
    m = t - 1
    idx = np.zeros((N, m), dtype=np.int64)
    dist = np.zeros((N, m))
    if m == 0:
        return idx, dist
    sq = (x * x).sum(1)
    short = min(N - 1, m + 8)
    for s in range(0, N, chunk):
        rows = np.arange(s, min(s + chunk, N))
        d2 = sq[rows, None] - 2.0 * x[rows] @ x.T + sq[None, :]
        d2[np.arange(len(rows)), rows] = np.inf
        cand = np.argpartition(d2, short - 1, axis=1)[:, :short]
        exact = np.sqrt(((x[cand] - x[rows, None, :]) ** 2).sum(2))
        exact[cand == rows[:, None]] = np.inf
        order = np.lexsort((cand, exact), axis=1)[:, :m]
        idx[rows] = np.take_along_axis(cand, order, axis=1)
        dist[rows] = np.take_along_axis(exact, order, axis=1)
    return idx, dist


def collab_weights(distances) -> np.ndarray:
    """Inverse-distance neighbor weights sharing half the mass; the self weight 0.5 is appended last.

    Accepts a 1-D array of t-1 distances or an (N, t-1) batch.
    """
    d = np.asarray(distances, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    if d.shape[-1] == 0:
        return np.ones(d.shape[:-1] + (1,))
    raw = 1.0 / np.maximum(d, DISTANCE_FLOOR)
    nbr = SELF_WEIGHT * raw / raw.sum(-1, keepdims=True)
    return np.concatenate([nbr, np.full(d.shape[:-1] + (1,), SELF_WEIGHT)], axis=-1)


def update_lambda(neighbor_lambdas, self_lambda, weights) -> np.ndarray:
    """Weighted blend of neighbor and self activity probabilities (self weight last)."""
    nl = np.asarray(neighbor_lambdas, dtype=np.float64).reshape(-1, np.shape(self_lambda)[-1])
    sl = np.asarray(self_lambda, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != len(nl) + 1:
        raise ValueError(f"{len(w)} weights for {len(nl)} neighbors plus self")
    out = w[:-1] @ nl + w[-1] * sl
    return np.clip(out, 0.0, 1.0)


def _update_all(post: np.ndarray, idx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # snapshot semantics: every patch reads the same pre-round posteriors
    out = weights[:, -1:] * post
    for j in range(idx.shape[1]):
        out += weights[:, j:j + 1] * post[idx[:, j]]
    return np.clip(out, 0.0, 1.0)


def denoise_cluster(cluster_vectors, dictionary: Dictionary, noise_variances, cfg,
                    coeff_variance: float | None = None) -> SparseBatch:
    """Sparse-code a cluster, then refine each patch using its neighbors' activity posteriors.

    ``cfg`` supplies collab_t, collab_rounds, max_support, beam_width and
    expected_sparsity. Returns one solution per input vector.
    """
    x = np.asarray(cluster_vectors, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty cluster")
    M = dictionary.num_atoms
    if coeff_variance is None:
        coeff_variance = default_coeff_variance(x, cfg.expected_sparsity)
    lam0 = min(cfg.expected_sparsity / M, 1.0)
    solve = lambda lam: bmp_batch(dictionary, x, lam, coeff_variance, noise_variances,
                                  cfg.max_support, cfg.beam_width)
    sol = solve(np.full(M, lam0))
    t = min(cfg.collab_t, len(x))
    if t <= 1 or cfg.collab_rounds == 0:
        return sol
    idx, dist = neighbor_table(x, t)
    weights = collab_weights(dist)
    for _ in range(cfg.collab_rounds):
        sol = solve(_update_all(sol.posterior_lambda, idx, weights))
    return sol


def default_coeff_variance(vectors: np.ndarray, expected_sparsity: float) -> float:
    energy = float(np.mean((vectors * vectors).sum(1)))
    return max(energy, 1e-12) / expected_sparsity

"""Seeded k-means with k-means++ initialization.

Deterministic given (data, k, seed): ties in assignment go to the lowest
cluster id, empty clusters are reseeded to the point farthest from its
nearest centroid, and the stopping tolerance is scaled by the data spread so
assignments are invariant to positive rescaling of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewItems, ValidationError


@dataclass
class KMeansResult:
    assignment: np.ndarray  # (n,) int cluster ids
    centroids: np.ndarray  # (k, d)
    inertia: float
    inertia_history: list[float]
    n_iter: int


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    closest = np.einsum("nd,nd->n", x - x[first], x - x[first])
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with a centroid; fall back to uniform
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=closest / total))
        centroids[j] = x[pick]
        d_new = np.einsum("nd,nd->n", x - x[pick], x - x[pick])
        closest = np.minimum(closest, d_new)
    return centroids


def kmeans(
    x: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> KMeansResult:
    """Lloyd iterations from a k-means++ start, fully seed-reproducible."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"kmeans expects 2-D data, got shape {x.shape}")
    if k < 1:
        raise ValidationError("k must be positive")
    n = x.shape[0]
    if n < k:
        raise TooFewItems(f"{n} items for k={k}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(x, k, rng)
    # scale-invariant stopping: centroid shifts compared against data spread
    spread = float(np.linalg.norm(x - x.mean(axis=0), axis=1).max())
    shift_tol = tol * max(spread, np.finfo(np.float64).tiny)

    assignment = np.zeros(n, dtype=np.intp)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        assignment = d2.argmin(axis=1)  # argmin takes the lowest id on ties
        history.append(float(d2[np.arange(n), assignment].sum()))

        new_centroids = centroids.copy()
        for c in range(k):
            members = assignment == c
            if members.any():
                new_centroids[c] = x[members].mean(axis=0)
            else:
                # reseed to the point farthest from its nearest centroid
                nearest = d2.min(axis=1)
                far = int(nearest.argmax())
                new_centroids[c] = x[far]
        shift = float(np.linalg.norm(new_centroids - centroids, axis=1).max())
        centroids = new_centroids
        if shift <= shift_tol:
            break

    d2 = _sq_dists(x, centroids)
    assignment = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assignment].sum())
    history.append(inertia)
    return KMeansResult(assignment, centroids, inertia, history, n_iter)


def default_cluster_count(n_items: int) -> int:
    """Cluster-count heuristic used when a caller does not fix k."""
    return max(2, int(round(np.sqrt(n_items / 2.0))))

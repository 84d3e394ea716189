"""k-means color clustering and candidate-region extraction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import raster
from .errors import InvalidK
from .preprocess import NormalizedImage

CLEANUP_RADIUS = 10
MIN_AREA = 256


@njit(cache=True)
def _assign(points, centroids, labels, dist):
    n, d = points.shape
    k = centroids.shape[0]
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(k):
            s = 0.0
            for c in range(d):
                t = points[i, c] - centroids[j, c]
                s += t * t
            if s < best:
                best = s
                arg = j
        labels[i] = arg
        dist[i] = best


@njit(cache=True)
def _means(points, labels, k):
    n, d = points.shape
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for c in range(d):
            sums[j, c] += points[i, c]
    for j in range(k):
        if counts[j] > 0:
            for c in range(d):
                sums[j, c] /= counts[j]
    return sums, counts


@njit(cache=True)
def _sq_dist_to(points, center, out):
    n, d = points.shape
    for i in range(n):
        s = 0.0
        for c in range(d):
            t = points[i, c] - center[c]
            s += t * t
        if s < out[i]:
            out[i] = s


@njit(cache=True)
def _total(values):
    s = 0.0
    for i in range(values.shape[0]):
        s += values[i]
    return s


@dataclass(frozen=True, eq=False)
class KMeansResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray = field(repr=False)
    objective: float
    history: tuple[float, ...] = ()


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = np.full(n, np.inf)
    for j in range(1, k):
        _sq_dist_to(points, centers[j - 1], closest)
        total = _total(closest)
        if total > 0:
            cum = np.cumsum(closest)
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[j] = points[idx]
    return centers


def _reseed_empty(points, centroids, labels, dist, k):
    """Give each empty cluster the point farthest from its own centroid."""
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.where(movable, dist, -1.0)
        p = int(np.argmax(cand))
        counts[labels[p]] -= 1
        counts[j] += 1
        labels[p] = j
        dist[p] = 0.0
        centroids[j] = points[p]


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 100,
           tol: float = 1e-4, n_init: int = 1) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when the relative objective improvement drops below ``tol`` or
    after ``max_iter`` updates. ``history`` holds the objective after every
    accepted step and is non-increasing.

    With ``n_init > 1`` the whole procedure is repeated from independent
    seedings and the run with the lowest objective is kept (earliest on
    ties). The first run always uses ``default_rng(seed)``, so ``n_init=1``
    and the first of several runs agree.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("points must be a non-empty (N, D) array")
    n = points.shape[0]
    if k < 1 or k > n:
        raise InvalidK(f"k={k} outside [1, {n}]")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")

    best = None
    for r in range(n_init):
        rng = np.random.default_rng(seed if r == 0 else [seed, r])
        run = _lloyd(points, k, rng, max_iter, tol)
        if best is None or run.objective < best.objective:
            best = run
    return best


def _lloyd(points, k, rng, max_iter, tol) -> KMeansResult:
    n = points.shape[0]
    centroids = kmeans_plus_plus(points, k, rng)
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    _assign(points, centroids, labels, dist)
    _reseed_empty(points, centroids, labels, dist, k)
    objective = _total(dist)
    history = [objective]

    for _ in range(max_iter):
        new_centroids, _ = _means(points, labels, k)
        new_labels = np.empty_like(labels)
        new_dist = np.empty_like(dist)
        _assign(points, new_centroids, new_labels, new_dist)
        _reseed_empty(points, new_centroids, new_labels, new_dist, k)
        new_objective = _total(new_dist)
        if new_objective > objective:
            # round-off only; Lloyd steps cannot increase the objective
            break
        improvement = objective - new_objective
        centroids, labels, dist = new_centroids, new_labels, new_dist
        history.append(new_objective)
        previous, objective = objective, new_objective
        if improvement <= tol * previous:
            break

    means, counts = _means(points, labels, k)
    nonempty = counts > 0
    final = centroids.copy()
    final[nonempty] = means[nonempty]
    diff = points - final[labels]
    final_objective = _total(np.einsum("ij,ij->i", diff, diff))
    if final_objective <= objective:
        centroids, objective = final, final_objective
        if final_objective < history[-1]:
            history.append(final_objective)
    return KMeansResult(k, centroids, labels, float(objective), tuple(history))


def cluster_masks(img: NormalizedImage | np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """Per-cluster masks after opening then closing with disk(10)."""
    pixels = img.image if isinstance(img, NormalizedImage) else img
    h, w = pixels.shape[:2]
    result = kmeans(pixels.reshape(-1, 3), k, seed)
    labels = result.labels.reshape(h, w)
    se = raster.disk(CLEANUP_RADIUS)
    return [raster.closing(raster.opening(labels == j, se), se) for j in range(k)]


def cluster_regions(img: NormalizedImage | np.ndarray, k: int, seed: int = 0,
                    min_area: int = MIN_AREA) -> list[raster.Region]:
    """Candidate regions from all clusters, each at least ``min_area`` pixels.

    Masks of different clusters are cleaned independently and may overlap.
    """
    regions = []
    for j, mask in enumerate(cluster_masks(img, k, seed)):
        regions.extend(r for r in raster.connected_components(mask, cluster=j)
                       if r.area >= min_area)
    return regions

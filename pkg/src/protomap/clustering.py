"""k-Means over reduced tokens: visual prototypes and their binary mask set.

Lloyd's algorithm with k-means++ seeding from an explicit seed, so a fixed
seed and fixed data give bit-identical assignments. Equidistant points go to
the lowest centroid index; clusters that empty out are re-seeded from the
point currently farthest from its centroid. Fit is a blocking call; the
returned model is immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grids import TokenMatrix

DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-4


@dataclass(eq=False)
class ClusterModel:
    """Fitted prototypes: centroids, per-token assignments and inertia.

    ``inertia_history`` logs the total squared distance after every
    assignment step; Lloyd iterations never increase it.
    """

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)


@dataclass(eq=False)
class MaskSet:
    """k binary masks over n views at d×d resolution.

    Masks are disjoint. In the plain 2D path they partition every view; in
    spatial mode, cells without geometry belong to no mask.
    """

    k: int
    n_views: int
    d: int
    masks: np.ndarray  # (k, n_views, d, d) bool

    def assignments(self) -> np.ndarray:
        """Per-cell prototype index, shape (n_views, d, d); -1 where no mask covers."""
        ids = np.argmax(self.masks, axis=0).astype(np.int32)
        ids[~self.masks.any(axis=0)] = -1
        return ids


def _pairwise_sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # |x|^2 + |c|^2 - 2 x.c via one gemm; clip tiny negatives from cancellation
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (centroids * centroids).sum(axis=1)[None, :]
        - 2.0 * (x @ centroids.T)
    )
    return np.maximum(d2, 0.0)


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]), dtype=x.dtype)
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a centroid; spread uniformly
            centroids[i] = x[rng.integers(n)]
            continue
        idx = rng.choice(n, p=d2 / total)
        centroids[i] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(
    reduced: TokenMatrix,
    k: int,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> ClusterModel:
    """Cluster matrix rows into k prototypes.

    Stops when the largest centroid shift drops below ``tol`` or after
    ``max_iters`` iterations. Requires at least k distinct rows.
    """
    if k < 1:
        raise ValidationError(f"kmeans_fit: k must be >= 1, got {k}")
    n = reduced.rows
    if n < k:
        raise ValidationError(f"kmeans_fit: k={k} exceeds {n} rows")
    distinct = np.unique(reduced.data, axis=0).shape[0]
    if distinct < k:
        raise ValidationError(f"kmeans_fit: k={k} exceeds {distinct} distinct points")

    x = reduced.data.astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(x, k, rng)
    history: list[float] = []

    for _ in range(max_iters):
        d2 = _pairwise_sq_dists(x, centroids)
        assign = d2.argmin(axis=1)  # argmin ties resolve to the lowest index
        point_d2 = d2[np.arange(n), assign]
        history.append(float(point_d2.sum()))

        new_centroids = centroids.copy()
        counts = np.bincount(assign, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                new_centroids[c] = x[assign == c].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # re-seed each empty cluster from the current farthest point
            farthest_pool = point_d2.copy()
            for c in empty:
                far = int(farthest_pool.argmax())
                new_centroids[c] = x[far]
                farthest_pool[far] = -np.inf

        shift = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        if shift < tol:
            break

    # final assignment consistent with the returned centroids
    d2 = _pairwise_sq_dists(x, centroids)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assign].sum())
    history.append(inertia)

    return ClusterModel(
        k=k,
        centroids=centroids.astype(np.float32),
        assignments=assign.astype(np.int32),
        inertia=inertia,
        inertia_history=history,
    )


def assignments_to_masks(model: ClusterModel, n_views: int, d: int) -> MaskSet:
    """Turn per-token assignments into k binary masks of shape (n_views, d, d)."""
    expected = n_views * d * d
    if model.assignments.shape[0] != expected:
        raise ValidationError(
            f"assignments_to_masks: {model.assignments.shape[0]} assignments, "
            f"expected {expected} for {n_views} view(s) at d={d}"
        )
    grid = model.assignments.reshape(n_views, d, d)
    masks = np.stack([grid == c for c in range(model.k)], axis=0)
    return MaskSet(k=model.k, n_views=n_views, d=d, masks=masks)


def masks_from_dense(ids: np.ndarray, k: int) -> MaskSet:
    """Build a mask set from dense per-cell ids of shape (n_views, d, d).

    Cells marked -1 (no data, e.g. missing geometry) end up in no mask.
    """
    grid = np.asarray(ids, dtype=np.int64)
    if grid.ndim != 3 or grid.shape[1] != grid.shape[2]:
        raise ValidationError(f"masks_from_dense: ids must be (views, d, d), got {grid.shape}")
    if grid.max(initial=-1) >= k:
        raise ValidationError(f"masks_from_dense: id {grid.max()} outside k={k}")
    masks = np.stack([grid == c for c in range(k)], axis=0)
    return MaskSet(k=k, n_views=grid.shape[0], d=grid.shape[1], masks=masks)

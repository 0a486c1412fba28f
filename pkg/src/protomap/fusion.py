"""Multi-view fusion: spatial clustering input, semantic clouds, voxel grids.

Pooled per-view features ride the patch-to-point maps onto the shared global
point cloud; fusion of overlapping views happens only at voxelization, where
cell membership is floor(p / v) per axis and per-cell features are averaged
then re-normalized.

Voxelization sorts rows into a canonical order before grouping so the result
is bit-identical under any permutation of the input cloud.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .alignment import PooledGrid, PromptSet, SimilarityMap, normalize_similarity
from .errors import EmptyGeometryError, IntegrityError, ValidationError
from .geometry import PatchPointMap
from .grids import TokenGrid, l2_normalize


@dataclass(eq=False)
class SpatialMatrix:
    """Clustering input of [feature | standardized xyz] rows, one per valid cell.

    row_view / row_cell record where each row came from so cluster assignments
    can be scattered back onto the per-view grids.
    """

    data: np.ndarray
    feature_cols: int
    row_view: np.ndarray
    row_cell: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        self.row_view = np.asarray(self.row_view, dtype=np.int32).reshape(-1)
        self.row_cell = np.asarray(self.row_cell, dtype=np.int32).reshape(-1)
        if self.data.ndim != 2:
            raise ValidationError(f"spatial matrix must be 2-D, got shape {self.data.shape}")
        if self.data.shape[1] != self.feature_cols + 3:
            raise ValidationError(
                f"spatial matrix has {self.data.shape[1]} cols, expected {self.feature_cols} + 3"
            )
        if self.row_view.shape[0] != self.data.shape[0] or self.row_cell.shape[0] != self.data.shape[0]:
            raise ValidationError("row provenance arrays must match the row count")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(eq=False)
class SemanticCloud:
    """Global points carrying language-grounded features; one row per (view, cell)."""

    points: np.ndarray
    features: np.ndarray
    view_of_point: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float32)
        self.features = np.asarray(self.features, dtype=np.float32)
        self.view_of_point = np.asarray(self.view_of_point, dtype=np.int32).reshape(-1)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValidationError(f"cloud points must be (n, 3), got {self.points.shape}")
        if self.features.ndim != 2 or self.features.shape[0] != self.points.shape[0]:
            raise ValidationError("cloud features must align with points row for row")
        if self.view_of_point.shape[0] != self.points.shape[0]:
            raise ValidationError("view_of_point must align with points")

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(eq=False)
class VoxelGrid:
    """Voxelized semantic map: sorted integer cell indices with fused features.

    indices rows are unique and lexicographically sorted; features are unit
    norm; centroids are the float64 mean positions of each cell's points.
    """

    voxel_size: float
    indices: np.ndarray
    features: np.ndarray
    counts: np.ndarray
    centroids: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float32)
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.voxel_size <= 0:
            raise ValidationError(f"voxel size must be positive, got {self.voxel_size}")
        n = self.indices.shape[0]
        if self.indices.ndim != 2 or (n and self.indices.shape[1] != 3):
            raise ValidationError("voxel indices must be (n, 3)")
        if self.features.shape[0] != n or self.counts.shape[0] != n or self.centroids.shape[0] != n:
            raise ValidationError("voxel arrays must share one row per cell")

    @property
    def n_cells(self) -> int:
        return self.indices.shape[0]

    def cell(self, key: Tuple[int, int, int]) -> Optional[int]:
        """Row of the cell with this integer 3-index, or None if absent."""
        if self.n_cells == 0:
            return None
        # rows are lexicographically sorted, so a structured view allows binary search
        dtype = [("x", np.int64), ("y", np.int64), ("z", np.int64)]
        view = np.ascontiguousarray(self.indices).view(dtype).reshape(-1)
        target = np.asarray([tuple(int(c) for c in key)], dtype=dtype)[0]
        row = int(np.searchsorted(view, target))
        if row < self.n_cells and view[row] == target:
            return row
        return None


@dataclass(eq=False)
class QueryResult:
    """Per-voxel normalized similarity and the thresholded label bit."""

    similarity: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.similarity = np.asarray(self.similarity, dtype=np.float32).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=bool).reshape(-1)
        if self.similarity.shape != self.labels.shape:
            raise ValidationError("similarity and labels must align")


def build_spatial_features(
    vision: Sequence[TokenGrid],
    points: np.ndarray,
    maps: Sequence[PatchPointMap],
) -> SpatialMatrix:
    """Concatenate per-cell features with standardized global coordinates.

    Raw metre coordinates next to unit-norm features would let scene scale
    dominate the clustering metric, so each axis is standardized (zero mean,
    unit variance) over the valid rows. Rows whose cells carry no geometry
    are dropped.
    """
    if len(vision) != len(maps):
        raise ValidationError("build_spatial_features: one patch-point map per view required")
    if not vision:
        raise ValidationError("build_spatial_features: at least one view required")
    channels = vision[0].channels
    pts = np.asarray(points, dtype=np.float64)

    feats, coords, views, cells = [], [], [], []
    for view, (grid, ppm) in enumerate(zip(vision, maps)):
        if grid.channels != channels:
            raise ValidationError("build_spatial_features: channel dims differ across views")
        flat = grid.data.reshape(-1, channels)
        if ppm.indices.shape[0] != flat.shape[0]:
            raise ValidationError(
                f"build_spatial_features: map length {ppm.indices.shape[0]} vs {flat.shape[0]} cells"
            )
        valid = ppm.indices >= 0
        if not valid.any():
            continue
        point_idx = ppm.indices[valid]
        if point_idx.max() >= pts.shape[0]:
            raise IntegrityError("build_spatial_features: point index out of range")
        feats.append(flat[valid])
        coords.append(pts[point_idx])
        views.append(np.full(int(valid.sum()), view, dtype=np.int32))
        cells.append(np.nonzero(valid)[0].astype(np.int32))

    if not feats:
        raise EmptyGeometryError("build_spatial_features: no cell carries geometry")

    xyz = np.concatenate(coords, axis=0)
    mean = xyz.mean(axis=0)
    std = xyz.std(axis=0)
    std[std < 1e-12] = 1.0  # degenerate axis: centered zeros, not NaN
    xyz = (xyz - mean) / std

    data = np.concatenate([np.concatenate(feats, axis=0), xyz.astype(np.float32)], axis=1)
    return SpatialMatrix(
        data=data,
        feature_cols=channels,
        row_view=np.concatenate(views),
        row_cell=np.concatenate(cells),
    )


def project_pooled_to_points(
    pooled: Sequence[PooledGrid],
    points: np.ndarray,
    maps: Sequence[PatchPointMap],
) -> SemanticCloud:
    """Attach each view's pooled features to its cells' global points.

    Overlapping views stay as separate rows here; they merge at voxelization.
    """
    if len(pooled) != len(maps):
        raise ValidationError("project_pooled_to_points: one map per pooled grid required")
    pts = np.asarray(points, dtype=np.float64)

    out_pts, out_feats, out_views = [], [], []
    for view, (grid, ppm) in enumerate(zip(pooled, maps)):
        if not grid.normalized:
            raise ValidationError("project_pooled_to_points: pooled grids must be normalized")
        flat = grid.data.reshape(-1, grid.channels)
        if ppm.indices.shape[0] != flat.shape[0]:
            raise IntegrityError(
                f"project_pooled_to_points: map length {ppm.indices.shape[0]} vs {flat.shape[0]} cells"
            )
        valid = ppm.indices >= 0
        if not valid.any():
            continue
        point_idx = ppm.indices[valid]
        if point_idx.max() >= pts.shape[0]:
            raise IntegrityError("project_pooled_to_points: point index out of range")
        out_pts.append(pts[point_idx])
        out_feats.append(flat[valid])
        out_views.append(np.full(int(valid.sum()), view, dtype=np.int32))

    if not out_pts:
        return SemanticCloud(
            points=np.zeros((0, 3), dtype=np.float32),
            features=np.zeros((0, pooled[0].channels if pooled else 0), dtype=np.float32),
            view_of_point=np.zeros(0, dtype=np.int32),
        )
    return SemanticCloud(
        points=np.concatenate(out_pts, axis=0).astype(np.float32),
        features=np.concatenate(out_feats, axis=0),
        view_of_point=np.concatenate(out_views),
    )


def voxel_downsample(cloud: SemanticCloud, v: float) -> VoxelGrid:
    """Group points by componentwise floor(p / v) and average their features.

    floor keeps negative coordinates correct (floor(-0.1/0.5) = -1). Averaged
    features are re-normalized to unit norm so cosine queries stay well-scaled.
    Rows are reduced in a canonical sorted order, making the grid bit-identical
    under permutation of the input cloud.
    """
    if v <= 0:
        raise ValidationError(f"voxel_downsample: voxel size must be positive, got {v}")
    n = cloud.size
    if n == 0:
        return VoxelGrid(
            voxel_size=v,
            indices=np.zeros((0, 3), dtype=np.int64),
            features=np.zeros((0, cloud.features.shape[1]), dtype=np.float32),
            counts=np.zeros(0, dtype=np.int64),
            centroids=np.zeros((0, 3), dtype=np.float64),
        )

    pts = cloud.points.astype(np.float64)
    keys = np.floor(pts / v).astype(np.int64)

    # canonical order: lexsort takes the last key as primary, so feed z, y, x
    # reversed and break exact ties by view then cell position
    order = np.lexsort((cloud.view_of_point, keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    pts = pts[order]
    feats = cloud.features[order].astype(np.float64)

    uniq, start = np.unique(keys, axis=0, return_index=True)
    group = np.zeros(n, dtype=np.int64)
    group[start] = 1
    group[0] = 0
    group = np.cumsum(group)

    n_cells = uniq.shape[0]
    counts = np.bincount(group, minlength=n_cells)
    feat_sum = np.zeros((n_cells, feats.shape[1]), dtype=np.float64)
    np.add.at(feat_sum, group, feats)
    pos_sum = np.zeros((n_cells, 3), dtype=np.float64)
    np.add.at(pos_sum, group, pts)

    mean_feat = feat_sum / counts[:, None]
    norms = np.linalg.norm(mean_feat, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return VoxelGrid(
        voxel_size=v,
        indices=uniq,
        features=(mean_feat / norms).astype(np.float32),
        counts=counts,
        centroids=pos_sum / counts[:, None],
    )


def query_grid(grid: VoxelGrid, prompts: PromptSet, tau: float) -> QueryResult:
    """Per-voxel prompt similarity, min-max normalized then thresholded at tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"query_grid: tau {tau} outside [0, 1]")
    if grid.n_cells == 0:
        return QueryResult(np.zeros(0, dtype=np.float32), np.zeros(0, dtype=bool))
    if not prompts.positives:
        raise ValidationError("query_grid: at least one positive prompt required")
    dim = grid.features.shape[1]
    for t in prompts.positives + prompts.negatives:
        if t.vector.shape[0] != dim:
            raise ValidationError(
                f"query_grid: prompt '{t.prompt}' is {t.vector.shape[0]}-d, grid features are {dim}-d"
            )

    acc = np.zeros(grid.n_cells, dtype=np.float64)
    for t in prompts.positives:
        acc += grid.features @ t.vector.astype(np.float64)
    for t in prompts.negatives:
        acc -= grid.features @ t.vector.astype(np.float64)

    lo, hi = float(acc.min()), float(acc.max())
    if hi - lo < 1e-12:
        norm = np.full(grid.n_cells, 0.5, dtype=np.float32)
    else:
        norm = ((acc - lo) / (hi - lo)).astype(np.float32)
    return QueryResult(similarity=norm, labels=norm >= tau)


def scatter_assignments(spatial: SpatialMatrix, assignments: np.ndarray, n_views: int, d: int) -> np.ndarray:
    """Spread per-row cluster ids back onto dense (view, d, d) planes; -1 = no geometry."""
    a = np.asarray(assignments).reshape(-1)
    if a.shape[0] != spatial.rows:
        raise ValidationError("scatter_assignments: assignment count must match matrix rows")
    dense = np.full((n_views, d, d), -1, dtype=np.int32)
    flat = dense.reshape(n_views, d * d)
    flat[spatial.row_view, spatial.row_cell] = a.astype(np.int32)
    return dense

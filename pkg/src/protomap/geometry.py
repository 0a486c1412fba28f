"""Camera geometry: median depth sampling, pinhole back-projection, SE(3).

Conventions pinned here so fusion stays consistent across views:
- a cell's continuous pixel center is the mean of its first and one-past-last
  pixel coordinates, i.e. (x0 + x1) / 2 with pixel (0,0) spanning [0,1)×[0,1);
- the image is tiled into d near-equal integer strips per axis, remainder
  pixels going to the leading tiles;
- an even number of valid depths yields the mean of the two middle values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import EmptyGeometryError, ValidationError


@dataclass(eq=False)
class Intrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")


@dataclass(eq=False)
class Pose:
    """Rigid camera-to-global transform: rotation matrix plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValidationError("pose needs a 3x3 rotation and a 3-vector translation")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-5:
            raise ValidationError(f"rotation not orthonormal (deviation {err:.2e})")
        det = float(np.linalg.det(self.rotation))
        if abs(det - 1.0) > 1e-5:
            raise ValidationError(f"rotation determinant {det:.6f} is not +1")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))


@dataclass(eq=False)
class CameraFrame:
    """One view's depth map with its intrinsics, pose and usable depth range."""

    depth: np.ndarray
    intrinsics: Intrinsics
    pose: Pose
    valid_range: Tuple[float, float] = (0.0, float("inf"))

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float32)
        if self.depth.ndim != 2:
            raise ValidationError(f"depth map must be 2-D, got shape {self.depth.shape}")
        lo, hi = self.valid_range
        if lo < 0 or hi < lo:
            raise ValidationError(f"invalid depth range ({lo}, {hi})")


@dataclass(eq=False)
class MedianDepthGrid:
    """Per-cell median depth on the shared d×d grid, with a validity flag per cell."""

    d: int
    depths: np.ndarray
    validity: np.ndarray
    src_height: int
    src_width: int

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=np.float32)
        self.validity = np.asarray(self.validity, dtype=bool)
        if self.depths.shape != (self.d, self.d) or self.validity.shape != (self.d, self.d):
            raise ValidationError("median depth grid shapes must both be d x d")


@dataclass(eq=False)
class PatchPointMap:
    """Cell index -> point index for one view; -1 marks cells without a point."""

    indices: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        valid = self.indices[self.indices >= 0]
        if valid.size != np.unique(valid).size:
            raise ValidationError("patch-point map must be injective over valid cells")

    def point_of_cell(self, cell: int) -> Optional[int]:
        idx = int(self.indices[cell])
        return None if idx < 0 else idx


def _tile_edges(n_pixels: int, d: int) -> np.ndarray:
    """d+1 tile boundaries over n pixels; remainder pixels widen the leading tiles."""
    base, rem = divmod(n_pixels, d)
    sizes = np.full(d, base, dtype=np.int64)
    sizes[:rem] += 1
    return np.concatenate([[0], np.cumsum(sizes)])


def median_depth_grid(frame: CameraFrame, d: int) -> MedianDepthGrid:
    """Median of the valid in-range depths inside each of the d×d pixel tiles.

    Validity means finite, strictly positive and inside the frame's range;
    cells whose tiles contain no valid pixel are flagged invalid.
    """
    h, w = frame.depth.shape
    if d < 1 or d > min(h, w):
        raise ValidationError(f"median_depth_grid: d={d} does not fit a {h}x{w} image")
    lo, hi = frame.valid_range
    valid = np.isfinite(frame.depth) & (frame.depth > 0) & (frame.depth >= lo) & (frame.depth <= hi)

    rows = _tile_edges(h, d)
    cols = _tile_edges(w, d)
    depths = np.zeros((d, d), dtype=np.float32)
    ok = np.zeros((d, d), dtype=bool)
    for i in range(d):
        for j in range(d):
            tile = frame.depth[rows[i] : rows[i + 1], cols[j] : cols[j + 1]]
            sel = valid[rows[i] : rows[i + 1], cols[j] : cols[j + 1]]
            if sel.any():
                depths[i, j] = np.median(tile[sel].astype(np.float64))
                ok[i, j] = True
    return MedianDepthGrid(d=d, depths=depths, validity=ok, src_height=h, src_width=w)


def cell_centers(grid: MedianDepthGrid) -> np.ndarray:
    """Continuous (u, v) pixel centers of all d² cells, row-major."""
    rows = _tile_edges(grid.src_height, grid.d).astype(np.float64)
    cols = _tile_edges(grid.src_width, grid.d).astype(np.float64)
    v = (rows[:-1] + rows[1:]) / 2.0
    u = (cols[:-1] + cols[1:]) / 2.0
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu.reshape(-1), vv.reshape(-1)], axis=1)


def backproject(grid: MedianDepthGrid, k: Intrinsics) -> Tuple[np.ndarray, PatchPointMap]:
    """Lift valid cells to camera-frame 3D points through the pinhole model.

    Returns an (n, 3) float64 array and the cell→point index map. Raises
    EmptyGeometryError when no cell is valid.
    """
    flat_valid = grid.validity.reshape(-1)
    if not flat_valid.any():
        raise EmptyGeometryError("backproject: no valid depth cells")
    centers = cell_centers(grid)[flat_valid]
    z = grid.depths.reshape(-1)[flat_valid].astype(np.float64)
    x = (centers[:, 0] - k.cx) * z / k.fx
    y = (centers[:, 1] - k.cy) * z / k.fy
    points = np.stack([x, y, z], axis=1)

    indices = np.full(grid.d * grid.d, -1, dtype=np.int64)
    indices[flat_valid] = np.arange(points.shape[0])
    return points, PatchPointMap(indices)


def forward_project(points: np.ndarray, k: Intrinsics) -> np.ndarray:
    """Project camera-frame points to (u, v) pixels; inverse of backproject."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValidationError(f"forward_project: expected (n, 3) points, got {p.shape}")
    z = p[:, 2]
    if np.any(z <= 0):
        raise ValidationError("forward_project: points must lie in front of the camera")
    u = p[:, 0] * k.fx / z + k.cx
    v = p[:, 1] * k.fy / z + k.cy
    return np.stack([u, v], axis=1)


def to_global(points: np.ndarray, pose: Pose) -> np.ndarray:
    """Apply the rigid transform R·p + t to every point; order is preserved."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValidationError(f"to_global: expected (n, 3) points, got {p.shape}")
    return p @ pose.rotation.T + pose.translation

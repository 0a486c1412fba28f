"""Dense float-grid primitives: storage, L2 normalization, resampling.

Conventions pinned here and relied on everywhere else:

* Grids are row-major float32 arrays. A feature map has shape (H, W, C),
  a token grid (d, d, C), a token matrix (rows, C).
* Resampling uses the align-corners convention: output corners map exactly
  onto input corners, interior samples at ``src = out * (in - 1) / (out - 1)``.
* Flattening scans row-major: row r of the matrix is grid cell
  ``(r // d, r % d)``.

All operations are pure functions on immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(eq=False)
class FeatureMap:
    """A dense H×W×C float32 grid, e.g. encoder patch tokens or a similarity plane."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        if self.data.ndim != 3:
            raise ValidationError(f"feature map must be H x W x C, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(eq=False)
class TokenGrid:
    """A square d×d×C float32 grid in the shared resolution."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[0] != self.data.shape[1]:
            raise ValidationError(f"token grid must be d x d x C, got shape {self.data.shape}")

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(eq=False)
class TokenMatrix:
    """Flattened tokens, one row per grid cell; may stack several views."""

    data: np.ndarray
    n_views: int = 1
    view_index: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValidationError(f"token matrix must be 2-D, got shape {self.data.shape}")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def l2_normalize(vectors: TokenMatrix) -> TokenMatrix:
    """Scale each row to unit L2 norm.

    Rows with norm below 1e-12 pass through unchanged so zero tokens do not
    turn into NaN. Non-finite input is rejected.
    """
    data = vectors.data
    if not np.all(np.isfinite(data)):
        raise ValidationError("l2_normalize: input contains non-finite values")
    norms = np.linalg.norm(data.astype(np.float64), axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    out = (data / norms).astype(np.float32)
    return TokenMatrix(out, n_views=vectors.n_views, view_index=vectors.view_index)


def _axis_coords(n_out: int, n_in: int) -> np.ndarray:
    # align-corners: endpoints land exactly on source endpoints
    if n_out == 1:
        return np.zeros(1, dtype=np.float64)
    return np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)


def _bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Align-corners bilinear resample of an (H, W, C) array.

    Interpolation uses the ``a + f * (b - a)`` form, which preserves constant
    fields bit-exactly and is the identity when the size is unchanged.
    """
    h, w = src.shape[0], src.shape[1]
    ys = _axis_coords(out_h, h)
    xs = _axis_coords(out_w, w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).astype(src.dtype)[:, None, None]
    fx = (xs - x0).astype(src.dtype)[None, :, None]

    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    top = a + fx * (b - a)
    bot = c + fx * (d - c)
    return top + fy * (bot - top)


def _nearest_indices(n_out: int, n_in: int) -> np.ndarray:
    # round to nearest source index, ties broken toward the smaller index
    coords = _axis_coords(n_out, n_in)
    return np.ceil(coords - 0.5).astype(np.intp)


def resize_bilinear(src: FeatureMap, d: int) -> TokenGrid:
    """Resample a feature map to a square d×d grid with bilinear interpolation.

    Channels are interpolated independently; anisotropic scaling is accepted
    (the output is always square).
    """
    if d < 1:
        raise ValidationError(f"resize_bilinear: target size must be >= 1, got {d}")
    if src.height == 0 or src.width == 0:
        raise ValidationError("resize_bilinear: source map is empty")
    return TokenGrid(_bilinear(src.data, d, d))


def resize_nearest(src: FeatureMap, d: int) -> TokenGrid:
    """Resample a feature map to d×d, copying the nearest source cell per output cell."""
    if d < 1:
        raise ValidationError(f"resize_nearest: target size must be >= 1, got {d}")
    if src.height == 0 or src.width == 0:
        raise ValidationError("resize_nearest: source map is empty")
    yi = _nearest_indices(d, src.height)
    xi = _nearest_indices(d, src.width)
    return TokenGrid(src.data[np.ix_(yi, xi)])


def flatten(grid: TokenGrid, view_index: int = 0) -> TokenMatrix:
    """Flatten a d×d×C grid to a (d·d)×C matrix, row-major cell order."""
    d = grid.d
    return TokenMatrix(grid.data.reshape(d * d, grid.channels), view_index=view_index)


def unflatten(matrix: TokenMatrix, d: int) -> TokenGrid:
    """Inverse of :func:`flatten` for a single-view matrix."""
    if matrix.rows != d * d:
        raise ValidationError(f"unflatten: expected {d * d} rows for d={d}, got {matrix.rows}")
    return TokenGrid(matrix.data.reshape(d, d, matrix.cols))


def stack_views(matrices: list[TokenMatrix]) -> TokenMatrix:
    """Concatenate per-view matrices into one multi-view matrix, view-major."""
    if not matrices:
        raise ValidationError("stack_views: no matrices given")
    cols = matrices[0].cols
    for m in matrices:
        if m.cols != cols:
            raise ValidationError("stack_views: mismatched channel dimensions")
    return TokenMatrix(np.concatenate([m.data for m in matrices], axis=0), n_views=len(matrices))

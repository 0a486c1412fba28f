"""Dimensionality reduction of token channels via PCA.

The fit is deterministic: an SVD of the centered covariance matrix (hermitian
path, no randomized solver) with a fixed sign convention — the
largest-magnitude entry of each component is made positive. Projection only,
no whitening. Fitted models are immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grids import TokenMatrix


@dataclass(eq=False)
class PcaModel:
    """Centered linear projection onto the top principal axes.

    ``components`` rows are orthonormal principal axes in descending
    eigenvalue order; ``explained_variance`` holds the matching eigenvalues
    of the sample covariance.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(tokens: TokenMatrix, c_r: int) -> PcaModel:
    """Fit a PCA model reducing ``tokens.cols`` channels to ``c_r``."""
    n, c = tokens.rows, tokens.cols
    if n < 2:
        raise ValidationError(f"pca_fit: need at least 2 rows, got {n}")
    if not 1 <= c_r <= min(n - 1, c):
        raise ValidationError(
            f"pca_fit: c_r={c_r} out of range [1, {min(n - 1, c)}] for a {n}x{c} matrix"
        )

    x = tokens.data.astype(np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    # hermitian SVD of the covariance = eigendecomposition, descending order
    basis, variances, _ = np.linalg.svd(cov, hermitian=True)
    components = basis[:, :c_r].T.copy()

    # sign convention: largest-magnitude entry of each component positive
    pivot = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(c_r), pivot])
    signs[signs == 0] = 1.0
    components *= signs[:, None]

    return PcaModel(mean=mean, components=components, explained_variance=variances[:c_r].copy())


def pca_transform(model: PcaModel, tokens: TokenMatrix) -> TokenMatrix:
    """Project rows onto the model's principal axes (centering included)."""
    if tokens.cols != model.mean.shape[0]:
        raise ValidationError(
            f"pca_transform: expected {model.mean.shape[0]} channels, got {tokens.cols}"
        )
    projected = (tokens.data.astype(np.float64) - model.mean) @ model.components.T
    return TokenMatrix(projected.astype(np.float32), n_views=tokens.n_views,
                       view_index=tokens.view_index)

"""Language grounding of visual prototypes.

Masked average pooling replaces every vision-language token with the mean
over its prototype mask, strictly per view; prompt similarity maps combine a
positive and a negative prompt set by summing cosine similarities. Pooling
different views may run concurrently — everything here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import MaskSet
from .errors import ValidationError
from .grids import TokenGrid


@dataclass(eq=False)
class PooledGrid:
    """Per-view d×d×C_vl grid whose cells share one feature per prototype mask."""

    data: np.ndarray
    view_index: int = 0
    normalized: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[0] != self.data.shape[1]:
            raise ValidationError(f"pooled grid must be d x d x C, got shape {self.data.shape}")

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(eq=False)
class TextEmbedding:
    """A prompt string with its unit-norm embedding vector."""

    prompt: str
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32).reshape(-1)


def text_embedding(prompt: str, vector: np.ndarray) -> TextEmbedding:
    """Build a TextEmbedding, normalizing the vector to unit length."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise ValidationError(f"text_embedding: zero vector for prompt '{prompt}'")
    return TextEmbedding(prompt=prompt, vector=(v / norm).astype(np.float32))


@dataclass(eq=False)
class PromptSet:
    """Positive and negative prompt embeddings; positives must be non-empty."""

    positives: list[TextEmbedding]
    negatives: list[TextEmbedding]


@dataclass(eq=False)
class SimilarityMap:
    """A d×d similarity plane; ``normalized`` marks min-max rescaled maps in [0, 1]."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValidationError(f"similarity map must be d x d, got shape {self.data.shape}")

    @property
    def d(self) -> int:
        return self.data.shape[0]


def masked_average_pool(vl_tokens: TokenGrid, masks: MaskSet, view: int) -> PooledGrid:
    """Replace every cell with the mean token over its prototype mask in this view.

    A mask that is empty in this view contributes nothing. Cells covered by
    no mask (possible in spatial mode where geometry is missing) come out as
    zero vectors, which downstream projection never picks up.
    """
    if vl_tokens.d != masks.d:
        raise ValidationError(
            f"masked_average_pool: grid d={vl_tokens.d} does not match mask d={masks.d}"
        )
    if not 0 <= view < masks.n_views:
        raise ValidationError(f"masked_average_pool: view {view} out of {masks.n_views}")

    d, c = vl_tokens.d, vl_tokens.channels
    flat = vl_tokens.data.reshape(d * d, c)
    pooled = np.zeros_like(flat)
    for m in range(masks.k):
        sel = masks.masks[m, view].reshape(-1)
        if sel.any():
            # accumulate in float64 so large masks keep 1e-6-level accuracy
            pooled[sel] = flat[sel].mean(axis=0, dtype=np.float64).astype(np.float32)
    return PooledGrid(pooled.reshape(d, d, c), view_index=view)


def normalize_pooled(pooled: PooledGrid) -> PooledGrid:
    """Scale every cell vector to unit L2 norm; zero cells pass through."""
    norms = np.linalg.norm(pooled.data.astype(np.float64), axis=2, keepdims=True)
    norms[norms < 1e-12] = 1.0
    out = (pooled.data / norms).astype(np.float32)
    return PooledGrid(out, view_index=pooled.view_index, normalized=True)


def similarity_map(pooled: PooledGrid, text: TextEmbedding) -> SimilarityMap:
    """Cosine similarity between a prompt embedding and every pooled cell."""
    if pooled.channels != text.vector.shape[0]:
        raise ValidationError(
            f"similarity_map: {pooled.channels} channels vs {text.vector.shape[0]}-d prompt"
        )
    if not pooled.normalized:
        raise ValidationError("similarity_map: pooled grid must be normalized first")
    return SimilarityMap(pooled.data @ text.vector)


def combined_similarity(pooled: PooledGrid, prompts: PromptSet) -> SimilarityMap:
    """Sum of positive-prompt similarities minus sum of negative-prompt similarities."""
    if not prompts.positives:
        raise ValidationError("combined_similarity: at least one positive prompt required")
    acc = np.zeros((pooled.d, pooled.d), dtype=np.float64)
    for t in prompts.positives:
        acc += similarity_map(pooled, t).data
    for t in prompts.negatives:
        acc -= similarity_map(pooled, t).data
    return SimilarityMap(acc.astype(np.float32))


def normalize_similarity(s: SimilarityMap) -> SimilarityMap:
    """Min-max rescale to [0, 1]; a constant map becomes all 0.5.

    A featureless response must not assert positive segmentation everywhere,
    so the degenerate case sits exactly at the usual decision threshold.
    """
    lo = float(s.data.min())
    hi = float(s.data.max())
    if hi - lo < 1e-12:
        return SimilarityMap(np.full_like(s.data, 0.5), normalized=True)
    return SimilarityMap((s.data - lo) / (hi - lo), normalized=True)

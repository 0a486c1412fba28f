"""Segmentation metrics and 2D-to-3D label projection.

IoU, precision, recall and F-score from a confusion count, with every 0/0
pessimistically defined as 0. Ground-truth labels move from one point set to
another by k-nearest-neighbour majority vote (ties toward the smaller label),
backed by a KD-tree but contractually equal to a brute-force scan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError


@dataclass(frozen=True)
class Confusion:
    """Elementwise binary confusion counts."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    """IoU, F-score, precision and recall, each in [0, 1]."""

    iou: float
    fsc: float
    pre: float
    rec: float


def confusion(pred, gt) -> Confusion:
    """Count tp/fp/fn/tn between two equal-shape binary arrays or masks."""
    p = np.asarray(pred.data if hasattr(pred, "data") else pred).astype(bool)
    g = np.asarray(gt.data if hasattr(gt, "data") else gt).astype(bool)
    if p.shape != g.shape:
        raise ValidationError(f"confusion: shape mismatch {p.shape} vs {g.shape}")
    return Confusion(
        tp=int(np.sum(p & g)),
        fp=int(np.sum(p & ~g)),
        fn=int(np.sum(~p & g)),
        tn=int(np.sum(~p & ~g)),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def metrics(c: Confusion) -> Metrics:
    """Derive the four segmentation metrics; any 0/0 is defined as 0."""
    pre = _ratio(c.tp, c.tp + c.fp)
    rec = _ratio(c.tp, c.tp + c.fn)
    fsc = 2.0 * pre * rec / (pre + rec) if pre + rec > 0 else 0.0
    iou = _ratio(c.tp, c.tp + c.fp + c.fn)
    return Metrics(iou=iou, fsc=fsc, pre=pre, rec=rec)


def project_labels_knn(
    gt_points: np.ndarray,
    gt_labels: np.ndarray,
    target_points: np.ndarray,
    k: int = 5,
) -> np.ndarray:
    """Give each target point the majority label of its k nearest labeled points.

    Ties break toward the smallest label id. k is clamped to the number of
    labeled points so sparse ground truth stays usable.
    """
    gp = np.asarray(gt_points, dtype=np.float64)
    gl = np.asarray(gt_labels).reshape(-1)
    tp = np.asarray(target_points, dtype=np.float64)
    if gp.ndim != 2 or gp.shape[1] != 3:
        raise ValidationError(f"project_labels_knn: gt points must be (n, 3), got {gp.shape}")
    if gp.shape[0] == 0:
        raise ValidationError("project_labels_knn: ground truth is empty")
    if gl.shape[0] != gp.shape[0]:
        raise ValidationError("project_labels_knn: one label per gt point required")
    if tp.ndim != 2 or tp.shape[1] != 3:
        raise ValidationError(f"project_labels_knn: target points must be (n, 3), got {tp.shape}")
    if k < 1:
        raise ValidationError(f"project_labels_knn: k must be >= 1, got {k}")
    if tp.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)

    kk = min(k, gp.shape[0])
    _, neighbors = cKDTree(gp).query(tp, k=kk)
    neighbors = np.atleast_2d(neighbors)
    if neighbors.shape[0] != tp.shape[0]:  # k=1 returns a flat vector
        neighbors = neighbors.reshape(tp.shape[0], kk)

    labels = gl.astype(np.int64)
    if labels.min() < 0:
        raise ValidationError("project_labels_knn: labels must be non-negative")
    out = np.empty(tp.shape[0], dtype=np.int64)
    for i in range(tp.shape[0]):
        votes = np.bincount(labels[neighbors[i]])
        out[i] = int(np.argmax(votes))  # argmax takes the first max: smallest label wins ties
    return out


def format_report(name: str, m: Metrics) -> str:
    """One metrics record as a stable, human-readable line (percentages)."""
    return (
        f"{name}: iou={m.iou * 100:.2f} fsc={m.fsc * 100:.2f} "
        f"pre={m.pre * 100:.2f} rec={m.rec * 100:.2f}"
    )

"""Scoring masks in 2D and transferring labels between point clouds in 3D."""

import numpy as np

from protomap import confusion, format_report, metrics, project_labels_knn

rng = np.random.default_rng(7)

# a hand-checkable case first: 3 hits, 1 false alarm, 1 miss
pred = np.array([[1, 1, 1, 1, 0]], bool)
gt = np.array([[1, 1, 1, 0, 1]], bool)
print(format_report("hand case", metrics(confusion(pred, gt))))

# now degrade a clean mask step by step and watch the numbers fall
gt = np.zeros((64, 64), bool)
gt[16:48, 16:48] = True
for flip_rate in (0.0, 0.05, 0.2):
    noisy = gt ^ (rng.random(gt.shape) < flip_rate)
    print(format_report(f"flip {int(flip_rate * 100):2d}%", metrics(confusion(noisy, gt))))

# 3D: ground truth lives on one cloud, predictions on another
gt_points = rng.normal(size=(500, 3)).astype(np.float32)
gt_labels = (gt_points[:, 0] > 0).astype(np.int64)  # label = side of the yz plane
pred_points = (gt_points + rng.normal(scale=0.05, size=(500, 3))).astype(np.float32)

transferred = project_labels_knn(gt_points, gt_labels, pred_points, k=5)
pred_labels = pred_points[:, 0] > 0
print(format_report("knn transfer", metrics(confusion(pred_labels, transferred != 0))))
agree = float(np.mean(transferred == gt_labels))
print(f"labels preserved across the jitter: {agree:.1%}")

"""Walk the 2D path end to end on synthetic tokens, one stage at a time.

The scene is four vertical strips. Each strip gets its own vision direction
(channels 0..3) and its own language direction (channels 4..7), so we know
exactly what the clusters and the pooled features should come out as.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from protomap import (
    FeatureMap,
    PromptSet,
    TokenMatrix,
    combined_similarity,
    flatten,
    kmeans_fit,
    l2_normalize,
    masked_average_pool,
    masks_from_dense,
    normalize_pooled,
    normalize_similarity,
    pca_fit,
    pca_transform,
    resize_bilinear,
    text_embedding,
    threshold_mask,
    unflatten,
    upsample_similarity,
)

out_dir = Path(__file__).parent / "out_segment2d"
out_dir.mkdir(exist_ok=True)
rng = np.random.default_rng(0)

d = 16          # shared token resolution
channels = 8
strip = np.repeat(np.arange(4), d // 4)   # column -> strip id
ids = np.tile(strip, (d, 1))

# fake encoder outputs: one-hot prototype per strip plus a little noise
vision = np.zeros((d, d, channels), np.float32)
vl = np.zeros((d, d, channels), np.float32)
for s in range(4):
    vision[:, :, s][ids == s] = 1.0
    vl[:, :, s + 4][ids == s] = 2.0
vision += rng.normal(0, 0.02, vision.shape).astype(np.float32)
vl += rng.normal(0, 0.02, vl.shape).astype(np.float32)

# both token maps go to the same d x d grid; rows are unit length afterwards
vision_grid = resize_bilinear(FeatureMap(vision), d)
vl_grid = resize_bilinear(FeatureMap(vl), d)
tokens = l2_normalize(flatten(vision_grid))
print("token matrix:", tokens.data.shape)

# compress, then cluster into visual prototypes
model = pca_fit(tokens, c_r=4)
reduced = pca_transform(model, tokens)
print("explained variance:", np.round(model.explained_variance, 4))

clusters = kmeans_fit(reduced, k=4, seed=0)
print("cluster sizes:", np.bincount(clusters.assignments))
print("final inertia:", round(float(clusters.inertia), 6))

dense = clusters.assignments.reshape(1, d, d).astype(np.int32)
masks = masks_from_dense(dense, k=4)

# every cell inherits the mean language feature of its prototype
pooled = normalize_pooled(masked_average_pool(vl_grid, masks, view=0))

# query "strip 0" against the other three
positive = text_embedding("strip0", np.eye(channels, dtype=np.float32)[4])
negatives = [
    text_embedding(f"strip{s}", np.eye(channels, dtype=np.float32)[s + 4]) for s in (1, 2, 3)
]
scores = combined_similarity(pooled, PromptSet([positive], negatives))
scores = normalize_similarity(scores)
print("per-strip mean score:", [round(float(scores.data[:, strip == s].mean()), 3) for s in range(4)])

# blow the coarse map up to image resolution and cut at tau
image_size = 64
heat = upsample_similarity(scores, image_size, image_size)
mask = threshold_mask(heat, tau=0.5)

gt = np.tile(strip[np.ceil(np.arange(image_size) * (d - 1) / (image_size - 1) - 0.5).astype(int)] == 0,
             (image_size, 1))
iou = np.sum(mask.data & gt) / np.sum(mask.data | gt)
print("mask IoU against the known strip:", round(float(iou), 4))

Image.fromarray(mask.data.astype(np.uint8) * 255).save(out_dir / "mask.png")
Image.fromarray(np.round(heat.data[:, :, 0] * 255).astype(np.uint8)).save(out_dir / "heat.png")
print("wrote", out_dir / "mask.png")

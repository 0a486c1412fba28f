"""Timing harness for the encoder-free single-view pipeline.

Measures resize -> normalize -> PCA -> k-Means -> pooling -> prompt
similarity -> normalize -> threshold on synthetic token maps shaped like a
real deployment (d=32, k=4, c_r=4, C_v=384, C_vl=512), reporting the median
over repeated runs. Thread pinning is the caller's job: set OMP/BLAS thread
environment variables before the interpreter starts.

Run directly:  python -m protomap.bench [--runs 50] [--seed 0]
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .alignment import (
    PromptSet,
    combined_similarity,
    masked_average_pool,
    normalize_pooled,
    normalize_similarity,
    text_embedding,
)
from .clustering import assignments_to_masks, kmeans_fit
from .grids import FeatureMap, flatten, l2_normalize, resize_bilinear
from .reduction import pca_fit, pca_transform
from .refinement import threshold_mask

D = 32
K = 4
C_R = 4
C_V = 384
C_VL = 512
SRC_VISION = (48, 64)  # raw token map sizes upstream of the shared resize
SRC_VL = (24, 32)


def make_inputs(seed: int = 0):
    """Synthetic raw token maps and prompts with realistic shapes."""
    rng = np.random.default_rng(seed)
    vision = FeatureMap(rng.standard_normal((*SRC_VISION, C_V)).astype(np.float32))
    vl = FeatureMap(rng.standard_normal((*SRC_VL, C_VL)).astype(np.float32))
    prompts = PromptSet(
        positives=[text_embedding("target", rng.standard_normal(C_VL))],
        negatives=[text_embedding("other", rng.standard_normal(C_VL))],
    )
    return vision, vl, prompts


def run_once(vision: FeatureMap, vl: FeatureMap, prompts: PromptSet, seed: int = 0) -> float:
    """One full pipeline pass; returns elapsed seconds."""
    t0 = time.perf_counter()
    grid = resize_bilinear(vision, D)
    matrix = l2_normalize(flatten(grid))
    vl_grid = resize_bilinear(vl, D)
    model = pca_fit(matrix, C_R)
    reduced = pca_transform(model, matrix)
    clusters = kmeans_fit(reduced, K, seed=seed)
    masks = assignments_to_masks(clusters, 1, D)
    pooled = normalize_pooled(masked_average_pool(vl_grid, masks, 0))
    sim = normalize_similarity(combined_similarity(pooled, prompts))
    threshold_mask(sim, 0.5)
    return time.perf_counter() - t0


def run_benchmark(runs: int = 50, seed: int = 0) -> dict:
    """Median/min/max seconds over `runs` passes on fixed inputs."""
    vision, vl, prompts = make_inputs(seed)
    run_once(vision, vl, prompts, seed)  # warm caches before measuring
    times = [run_once(vision, vl, prompts, seed) for _ in range(runs)]
    return {
        "runs": runs,
        "median_s": float(np.median(times)),
        "min_s": float(np.min(times)),
        "max_s": float(np.max(times)),
        "d": D,
        "k": K,
        "c_r": C_R,
        "c_v": C_V,
        "c_vl": C_VL,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    result = run_benchmark(runs=args.runs, seed=args.seed)
    json.dump(result, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

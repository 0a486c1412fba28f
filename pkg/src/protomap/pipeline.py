"""End-to-end flows: 2D segmentation, 3D reconstruction, queries, evaluation.

Every flow computes its full result before writing any file, so a failing
stage leaves no partial output. Stage failures carry the stage name in the
error message. Wall-clock timings are returned to the caller for console
display; they never enter the written reports, which are bit-reproducible
for a fixed seed and fixed inputs.
"""

from __future__ import annotations

import json
import shlex
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .alignment import (
    PromptSet,
    SimilarityMap,
    combined_similarity,
    masked_average_pool,
    normalize_pooled,
    normalize_similarity,
    text_embedding,
)
from .clustering import assignments_to_masks, kmeans_fit, masks_from_dense
from .errors import (
    EmptyGeometryError,
    FormatError,
    RefinerError,
    ValidationError,
)
from .evaluation import Metrics, confusion, format_report, metrics, project_labels_knn
from .fusion import (
    VoxelGrid,
    build_spatial_features,
    project_pooled_to_points,
    query_grid,
    scatter_assignments,
    voxel_downsample,
)
from .geometry import (
    CameraFrame,
    Intrinsics,
    PatchPointMap,
    Pose,
    backproject,
    median_depth_grid,
    to_global,
)
from .grids import FeatureMap, TokenGrid, TokenMatrix, flatten, l2_normalize, resize_bilinear, unflatten
from .manifest import PipelineConfig, SceneManifest
from .otf import read_otf, write_otf
from .ply import read_ply, write_ply
from .reduction import pca_fit, pca_transform
from .refinement import BinaryMask, ImageRef, refine, subprocess_hook


@contextmanager
def _stage(name: str):
    """Prefix validation/format errors with the failing stage's name."""
    try:
        yield
    except RefinerError:
        raise  # already names its hook
    except (ValidationError, FormatError) as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc


def _load_feature_map(path, what: str) -> FeatureMap:
    arr = read_otf(path)
    if arr.ndim not in (2, 3):
        raise FormatError(f"{what} tensor must be 2-D or 3-D, got shape {arr.shape} in {path}")
    return FeatureMap(arr)


def load_prompt_set(scene: SceneManifest) -> PromptSet:
    """Read prompt embeddings from the manifest's tensor files."""
    positives, negatives = [], []
    for p in scene.prompts:
        vec = read_otf(p.embedding).reshape(-1)
        emb = text_embedding(p.name, vec)
        (positives if p.role == "positive" else negatives).append(emb)
    return PromptSet(positives=positives, negatives=negatives)


def _normalized_grid(raw: FeatureMap, d: int, view_index: int = 0) -> TokenGrid:
    """Shared-resolution unit-norm tokens: resize then row-normalize."""
    grid = resize_bilinear(raw, d)
    matrix = l2_normalize(flatten(grid, view_index=view_index))
    out = unflatten(matrix, d)
    out.normalized = True
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_mask_png(path: Path, mask: BinaryMask) -> None:
    img = Image.fromarray((mask.data.astype(np.uint8)) * 255, mode="L")
    img.save(path, format="PNG")


def _load_mask_png(path) -> BinaryMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return BinaryMask(arr != 0)


def _config_dict(config: PipelineConfig) -> dict:
    return {
        "d": config.d,
        "k": config.k,
        "c_r": config.c_r,
        "v": config.v,
        "tau": config.tau,
        "seed": config.seed,
        "depth_min": config.depth_min,
        "depth_max": None if config.depth_max == float("inf") else config.depth_max,
        "refiner": config.refiner,
    }


@dataclass(eq=False)
class Segment2dResult:
    mask: BinaryMask
    similarity: SimilarityMap
    assignments: np.ndarray
    metrics: Optional[Metrics]
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)


def segment2d(scene: SceneManifest, config: PipelineConfig, out_dir) -> Segment2dResult:
    """Single-frame segmentation: tokens in, image-resolution binary mask out.

    Without an image reference the mask is produced at the vision-language
    token map's native resolution.
    """
    if len(scene.frames) != 1:
        raise ValidationError(f"segment2d: expected a single-frame scene, got {len(scene.frames)}")
    frame = scene.frames[0]
    out = Path(out_dir)
    timings: dict = {}
    t_all = time.perf_counter()

    def clock(name, t0):
        timings[name] = time.perf_counter() - t0

    t0 = time.perf_counter()
    with _stage("load"):
        vision_raw = _load_feature_map(frame.vision_tokens, "vision tokens")
        vl_raw = _load_feature_map(frame.vl_tokens, "vision-language tokens")
        prompts = load_prompt_set(scene)
        if not prompts.positives:
            raise ValidationError("at least one positive prompt required")
    clock("load", t0)

    t0 = time.perf_counter()
    with _stage("resize"):
        vision = _normalized_grid(vision_raw, config.d)
        vl = resize_bilinear(vl_raw, config.d)
    clock("resize", t0)

    t0 = time.perf_counter()
    with _stage("reduce"):
        model = pca_fit(flatten(vision), config.c_r)
        reduced = pca_transform(model, flatten(vision))
    clock("reduce", t0)

    t0 = time.perf_counter()
    with _stage("cluster"):
        clusters = kmeans_fit(reduced, config.k, seed=config.seed)
        masks = assignments_to_masks(clusters, 1, config.d)
    clock("cluster", t0)

    t0 = time.perf_counter()
    with _stage("pool"):
        pooled = normalize_pooled(masked_average_pool(vl, masks, 0))
    clock("pool", t0)

    t0 = time.perf_counter()
    with _stage("similarity"):
        sim = normalize_similarity(combined_similarity(pooled, prompts))
    clock("similarity", t0)

    t0 = time.perf_counter()
    with _stage("refine"):
        if frame.image is not None:
            with Image.open(frame.image) as img:
                width, height = img.size
            image = ImageRef(path=str(frame.image), height=height, width=width)
        else:
            image = ImageRef(path=None, height=vl_raw.height, width=vl_raw.width)
        hook = None
        if config.refiner:
            parts = shlex.split(config.refiner)
            hook = subprocess_hook(Path(parts[0]).name, parts)
        mask = refine(image, sim, hook, config.tau)
    clock("refine", t0)

    scored: Optional[Metrics] = None
    with _stage("evaluate"):
        if frame.gt_mask is not None:
            gt = _load_mask_png(frame.gt_mask)
            scored = metrics(confusion(mask, gt))
    timings["total"] = time.perf_counter() - t_all

    with _stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        outputs = {
            "mask": out / "mask.png",
            "similarity": out / "similarity.otf",
            "assignments": out / "assignments.otf",
            "report": out / "report.json",
        }
        _write_mask_png(outputs["mask"], mask)
        write_otf(outputs["similarity"], sim.data)
        write_otf(outputs["assignments"], masks.assignments()[0].astype(np.float32))
        report = {
            "mode": "segment2d",
            "params": _config_dict(config),
            "prompts": {
                "positive": [t.prompt for t in prompts.positives],
                "negative": [t.prompt for t in prompts.negatives],
            },
            "mask": outputs["mask"].name,
            "metrics": None
            if scored is None
            else {"iou": scored.iou, "fsc": scored.fsc, "pre": scored.pre, "rec": scored.rec},
        }
        _write_json(outputs["report"], report)

    return Segment2dResult(
        mask=mask,
        similarity=sim,
        assignments=masks.assignments()[0],
        metrics=scored,
        timings=timings,
        outputs={k: str(v) for k, v in outputs.items()},
    )


@dataclass(eq=False)
class Reconstruct3dResult:
    grid: VoxelGrid
    frames_used: list
    frames_skipped: list
    seconds: float
    outputs: dict = field(default_factory=dict)


def reconstruct3d(scene: SceneManifest, config: PipelineConfig, out_dir) -> Reconstruct3dResult:
    """Multi-view fusion into a language-queryable voxel grid.

    Frames without usable geometry (no depth/pose/intrinsics, or no valid
    depth cell) are skipped; skipping every frame is an error.
    """
    out = Path(out_dir)
    t_all = time.perf_counter()

    with _stage("load"):
        if not scene.frames:
            raise ValidationError("reconstruct3d: scene has no frames")

    vision_grids: list[TokenGrid] = []
    vl_grids: list[TokenGrid] = []
    frame_points: list[np.ndarray] = []
    frame_maps: list[PatchPointMap] = []
    used: list[int] = []
    skipped: list[int] = []

    for i, frame in enumerate(scene.frames):
        if frame.depth is None or frame.pose is None or frame.intrinsics is None:
            skipped.append(i)
            continue
        with _stage(f"frame {i}"):
            depth = read_otf(frame.depth)
            if depth.ndim != 2:
                raise FormatError(f"depth tensor must be 2-D, got shape {depth.shape}")
            intr = Intrinsics(**frame.intrinsics)
            pose = Pose(frame.pose[:3, :3], frame.pose[:3, 3])
            cam = CameraFrame(
                depth=depth,
                intrinsics=intr,
                pose=pose,
                valid_range=(config.depth_min, config.depth_max),
            )
            try:
                grid = median_depth_grid(cam, config.d)
                local, ppm = backproject(grid, intr)
            except EmptyGeometryError:
                skipped.append(i)
                continue
            vision_raw = _load_feature_map(frame.vision_tokens, "vision tokens")
            vl_raw = _load_feature_map(frame.vl_tokens, "vision-language tokens")
            vision_grids.append(_normalized_grid(vision_raw, config.d, view_index=len(used)))
            vl_grids.append(resize_bilinear(vl_raw, config.d))
            frame_points.append(to_global(local, pose))
            frame_maps.append(ppm)
            used.append(i)

    with _stage("fuse"):
        if not used:
            raise ValidationError("reconstruct3d: no frame has usable depth")
        offsets = np.cumsum([0] + [p.shape[0] for p in frame_points[:-1]])
        global_points = np.concatenate(frame_points, axis=0)
        maps = []
        for ppm, off in zip(frame_maps, offsets):
            shifted = ppm.indices.copy()
            shifted[shifted >= 0] += off
            maps.append(PatchPointMap(shifted))
        spatial = build_spatial_features(vision_grids, global_points, maps)

    with _stage("cluster"):
        matrix = TokenMatrix(spatial.data, n_views=len(used))
        model = pca_fit(matrix, config.c_r)
        reduced = pca_transform(model, matrix)
        clusters = kmeans_fit(reduced, config.k, seed=config.seed)
        dense = scatter_assignments(spatial, clusters.assignments, len(used), config.d)
        masks = masks_from_dense(dense, config.k)

    with _stage("pool"):
        pooled = [
            normalize_pooled(masked_average_pool(vl_grids[v], masks, v)) for v in range(len(used))
        ]

    with _stage("voxelize"):
        cloud = project_pooled_to_points(pooled, global_points, maps)
        grid = voxel_downsample(cloud, config.v)
        if grid.n_cells == 0:
            raise EmptyGeometryError("reconstruct3d: voxel grid came out empty")

    seconds = time.perf_counter() - t_all

    with _stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        outputs = {
            "ply": out / "grid.ply",
            "features": out / "grid_features.otf",
            "indices": out / "grid_indices.otf",
            "counts": out / "grid_counts.otf",
            "meta": out / "grid_meta.json",
            "report": out / "report.json",
        }
        # occupancy shading: per-voxel point count against the densest cell
        occupancy = grid.counts / grid.counts.max()
        write_ply(grid.centroids.astype(np.float32), outputs["ply"], mode="similarity", values=occupancy)
        write_otf(outputs["features"], grid.features)
        write_otf(outputs["indices"], grid.indices.astype(np.float32))
        write_otf(outputs["counts"], grid.counts.astype(np.float32))
        _write_json(
            outputs["meta"],
            {
                "voxel_size": grid.voxel_size,
                "cells": int(grid.n_cells),
                "feature_dim": int(grid.features.shape[1]),
                "files": {
                    "ply": outputs["ply"].name,
                    "features": outputs["features"].name,
                    "indices": outputs["indices"].name,
                    "counts": outputs["counts"].name,
                },
            },
        )
        _write_json(
            outputs["report"],
            {
                "mode": "reconstruct3d",
                "params": _config_dict(config),
                "frames_used": used,
                "frames_skipped": skipped,
                "points": int(cloud.size),
                "cells": int(grid.n_cells),
            },
        )

    return Reconstruct3dResult(
        grid=grid,
        frames_used=used,
        frames_skipped=skipped,
        seconds=seconds,
        outputs={k: str(v) for k, v in outputs.items()},
    )


def load_grid(meta_path) -> VoxelGrid:
    """Reload a written voxel grid from its metadata file."""
    meta_path = Path(meta_path)
    if not meta_path.exists():
        raise FormatError(f"grid metadata not found: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{meta_path} is not valid JSON: {exc}") from exc
    for key in ("voxel_size", "files"):
        if key not in meta:
            raise FormatError(f"{meta_path}: missing '{key}'")
    base = meta_path.parent
    features = read_otf(base / meta["files"]["features"])
    indices = read_otf(base / meta["files"]["indices"]).astype(np.int64)
    counts = read_otf(base / meta["files"]["counts"]).astype(np.int64)
    centroids, _ = read_ply(base / meta["files"]["ply"])
    return VoxelGrid(
        voxel_size=float(meta["voxel_size"]),
        indices=indices,
        features=features,
        counts=counts,
        centroids=centroids.astype(np.float64),
    )


@dataclass(eq=False)
class QueryRunResult:
    similarity: np.ndarray
    labels: np.ndarray
    outputs: dict = field(default_factory=dict)


def query(meta_path, prompt_paths_pos, prompt_paths_neg, tau: float, out_dir) -> QueryRunResult:
    """Query a stored voxel grid with prompt embedding files; no reconstruction."""
    out = Path(out_dir)
    with _stage("load"):
        grid = load_grid(meta_path)
        positives = [text_embedding(Path(p).stem, read_otf(p).reshape(-1)) for p in prompt_paths_pos]
        negatives = [text_embedding(Path(p).stem, read_otf(p).reshape(-1)) for p in prompt_paths_neg]
        if not positives:
            raise ValidationError("query: at least one positive prompt required")
    with _stage("query"):
        result = query_grid(grid, PromptSet(positives=positives, negatives=negatives), tau)
    with _stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        outputs = {
            "ply": out / "labels.ply",
            "similarity": out / "similarity.otf",
            "labels": out / "labels.otf",
            "report": out / "report.json",
        }
        write_ply(
            grid.centroids.astype(np.float32),
            outputs["ply"],
            mode="label",
            labels=result.labels.astype(np.int64),
        )
        write_otf(outputs["similarity"], result.similarity)
        write_otf(outputs["labels"], result.labels.astype(np.float32))
        _write_json(
            outputs["report"],
            {
                "mode": "query",
                "tau": tau,
                "cells": int(result.labels.shape[0]),
                "labeled": int(result.labels.sum()),
                "prompts": {
                    "positive": [t.prompt for t in positives],
                    "negative": [t.prompt for t in negatives],
                },
            },
        )
    return QueryRunResult(
        similarity=result.similarity,
        labels=result.labels,
        outputs={k: str(v) for k, v in outputs.items()},
    )


@dataclass(eq=False)
class EvalRunResult:
    metrics: Metrics
    report_line: str
    outputs: dict = field(default_factory=dict)


def evaluate2d(pred_path, gt_path, out_dir: Optional[str] = None) -> EvalRunResult:
    """Compare two binary mask images."""
    with _stage("evaluate"):
        pred = _load_mask_png(pred_path)
        gt = _load_mask_png(gt_path)
        m = metrics(confusion(pred, gt))
    return _finish_eval(m, "eval2d", out_dir)


def evaluate3d(
    pred_points_path,
    pred_labels_path,
    gt_points_path,
    gt_labels_path,
    k: int = 5,
    out_dir: Optional[str] = None,
) -> EvalRunResult:
    """Project ground-truth point labels onto predicted points, then score."""
    with _stage("evaluate"):
        pred_points, _ = read_ply(pred_points_path)
        pred_labels = read_otf(pred_labels_path).reshape(-1)
        gt_points, _ = read_ply(gt_points_path)
        gt_labels = read_otf(gt_labels_path).reshape(-1)
        if pred_labels.shape[0] != pred_points.shape[0]:
            raise ValidationError("evaluate3d: one label per predicted point required")
        if gt_labels.shape[0] != gt_points.shape[0]:
            raise ValidationError("evaluate3d: one label per ground-truth point required")
        projected = project_labels_knn(
            gt_points.astype(np.float64),
            np.rint(gt_labels).astype(np.int64),
            pred_points.astype(np.float64),
            k=k,
        )
        m = metrics(confusion(np.rint(pred_labels).astype(np.int64) != 0, projected != 0))
    return _finish_eval(m, "eval3d", out_dir)


def _finish_eval(m: Metrics, name: str, out_dir: Optional[str]) -> EvalRunResult:
    line = format_report(name, m)
    outputs = {}
    if out_dir is not None:
        with _stage("write"):
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            outputs["report"] = out / "report.json"
            _write_json(
                outputs["report"],
                {
                    "mode": name,
                    "metrics": {"iou": m.iou, "fsc": m.fsc, "pre": m.pre, "rec": m.rec},
                },
            )
    return EvalRunResult(metrics=m, report_line=line, outputs={k: str(v) for k, v in outputs.items()})

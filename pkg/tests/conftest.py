"""Shared synthetic scene builders for the pipeline and CLI tests."""

import json

import numpy as np
from PIL import Image

from protomap import write_otf


def nearest_upscale_1d(n_out, n_in):
    """Independent nearest-index resampling: align-corners, ties to the smaller index."""
    if n_out == 1:
        return np.zeros(1, dtype=int)
    src = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    return np.ceil(src - 0.5).astype(int)


def build_strip_scene(tmp, d=16, channels=8, noise=0.0, image_size=64, seed=0):
    """Single-frame scene of 4 vertical strips with prototype-aligned prompts.

    Strip s fills columns [4s, 4s+4). Vision tokens use channels 0..3, the
    vision-language tokens channels 4..7, so strip s pools to basis vector
    e_{s+4}. Prompts: p0 positive, p1..p3 negative. Ground truth marks strip 0
    upscaled to the image size with the same nearest convention the library
    documents, computed here independently.

    Returns (manifest_path, strip_ids) where strip_ids is the d×d id grid.
    """
    rng = np.random.default_rng(seed)
    strip = np.repeat(np.arange(4), d // 4)
    ids = np.tile(strip, (d, 1))

    vis = np.zeros((d, d, channels), np.float32)
    vl = np.zeros((d, d, channels), np.float32)
    for s in range(4):
        vis[:, :, s][ids == s] = 1.0
        vl[:, :, s + 4][ids == s] = 2.0
    if noise > 0:
        vis += rng.normal(0.0, noise, vis.shape).astype(np.float32)
        vl += rng.normal(0.0, noise, vl.shape).astype(np.float32)
    write_otf(tmp / "vision.otf", vis)
    write_otf(tmp / "vl.otf", vl)

    Image.fromarray(np.zeros((image_size, image_size), np.uint8)).save(tmp / "image.png")

    cols = nearest_upscale_1d(image_size, d)
    gt_row = strip[cols] == 0
    gt = np.tile(gt_row, (image_size, 1))
    Image.fromarray((gt * 255).astype(np.uint8)).save(tmp / "gt.png")

    prompts = []
    for s in range(4):
        e = np.zeros(channels, np.float32)
        e[s + 4] = 1.0
        write_otf(tmp / f"p{s}.otf", e)
        prompts.append(
            {
                "name": f"p{s}",
                "embedding": f"p{s}.otf",
                "role": "positive" if s == 0 else "negative",
            }
        )

    manifest = {
        "frames": [
            {
                "image": "image.png",
                "vision_tokens": "vision.otf",
                "vl_tokens": "vl.otf",
                "gt_mask": "gt.png",
            }
        ],
        "prompts": prompts,
        "params": {"d": d, "k": 4, "c_r": 4, "tau": 0.5, "seed": 0},
    }
    path = tmp / "scene.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path, ids


def build_two_view_scene(tmp, d=8, channels=6, depth_value=2.0, translate=0.0, image_hw=32):
    """Two-frame scene over a constant-depth plane, left/right token split.

    With translate=0 both views see identical geometry (identity poses).
    Returns the manifest path.
    """
    ids = np.zeros((d, d), int)
    ids[:, d // 2 :] = 1
    vis = np.zeros((d, d, channels), np.float32)
    vl = np.zeros((d, d, channels), np.float32)
    for s in range(2):
        vis[:, :, s][ids == s] = 1.0
        vl[:, :, s + 2][ids == s] = 3.0
    write_otf(tmp / "vision.otf", vis)
    write_otf(tmp / "vl.otf", vl)
    write_otf(tmp / "depth.otf", np.full((image_hw, image_hw), depth_value, np.float32))

    for s in range(2):
        e = np.zeros(channels, np.float32)
        e[s + 2] = 1.0
        write_otf(tmp / f"q{s}.otf", e)

    def pose(tx):
        m = np.eye(4)
        m[0, 3] = tx
        return [float(x) for x in m.reshape(-1)]

    intr = {"fx": image_hw / 2.0, "fy": image_hw / 2.0, "cx": image_hw / 2.0, "cy": image_hw / 2.0}
    manifest = {
        "frames": [
            {
                "vision_tokens": "vision.otf",
                "vl_tokens": "vl.otf",
                "depth": "depth.otf",
                "pose": pose(0.0),
                "intrinsics": intr,
            },
            {
                "vision_tokens": "vision.otf",
                "vl_tokens": "vl.otf",
                "depth": "depth.otf",
                "pose": pose(translate),
                "intrinsics": intr,
            },
        ],
        "prompts": [],
        "params": {"d": d, "k": 2, "c_r": 4, "v": 0.5, "seed": 0},
    }
    path = tmp / "scene3d.json"
    path.write_text(json.dumps(manifest))
    return path

"""Fuse two depth frames into a voxel feature grid, then query it by text.

Uses the same high-level entry points the command line calls, driven from a
manifest written on the fly.
"""

import json
from pathlib import Path

import numpy as np

from protomap import (
    config_for_scene,
    load_manifest,
    query,
    reconstruct3d,
    write_otf,
)

work = Path(__file__).parent / "out_map3d"
work.mkdir(exist_ok=True)

d = 8
channels = 6
image_hw = 32

# left half of the frame is "floor", right half is "wall"
ids = np.zeros((d, d), int)
ids[:, d // 2:] = 1
vision = np.zeros((d, d, channels), np.float32)
vl = np.zeros((d, d, channels), np.float32)
for s in range(2):
    vision[:, :, s][ids == s] = 1.0
    vl[:, :, s + 2][ids == s] = 3.0
write_otf(work / "vision.otf", vision)
write_otf(work / "vl.otf", vl)

# a flat plane 2 m in front of the camera
write_otf(work / "depth.otf", np.full((image_hw, image_hw), 2.0, np.float32))

# query embeddings, one per half
write_otf(work / "floor.otf", np.eye(channels, dtype=np.float32)[2])
write_otf(work / "wall.otf", np.eye(channels, dtype=np.float32)[3])

identity = [float(x) for x in np.eye(4).reshape(-1)]
frame = {
    "vision_tokens": "vision.otf",
    "vl_tokens": "vl.otf",
    "depth": "depth.otf",
    "pose": identity,
    "intrinsics": {"fx": 16.0, "fy": 16.0, "cx": 16.0, "cy": 16.0},
}
(work / "scene.json").write_text(json.dumps({
    "frames": [frame, frame],  # second view sees the same plane
    "prompts": [],
    "params": {"d": d, "k": 2, "c_r": 4, "v": 0.5, "seed": 0},
}))

scene = load_manifest(work / "scene.json")
config = config_for_scene(scene)
built = reconstruct3d(scene, config, work / "grid")
print("frames used:", built.frames_used)
print("voxels:", built.grid.n_cells, "feature dim:", built.grid.features.shape[1])
print("cell span x:", built.grid.indices[:, 0].min(), "..", built.grid.indices[:, 0].max())

result = query(work / "grid" / "grid_meta.json", [work / "floor.otf"], [work / "wall.otf"],
               tau=0.5, out_dir=work / "floor_query")
n_hit = int(result.labels.sum())
print(f"'floor' query labels {n_hit} of {built.grid.n_cells} voxels")
print("score range:", round(float(result.similarity.min()), 3),
      "..", round(float(result.similarity.max()), 3))
print("wrote", work / "floor_query" / "labels.ply")

"""Scene manifests and pipeline configuration.

A manifest is a human-editable JSON file; bulk data (tokens, depth,
embeddings) lives in tensor files it points to. Relative paths resolve
against the manifest's own directory.

    {
      "frames": [
        {"image": "frame0.png",            // optional unless a refiner runs
         "vision_tokens": "vis0.otf",
         "vl_tokens": "vl0.otf",
         "depth": "depth0.otf",            // optional; required for 3D
         "pose": [16 floats, row-major 4x4],
         "intrinsics": {"fx":..,"fy":..,"cx":..,"cy":..},
         "gt_mask": "gt0.png"}             // optional
      ],
      "prompts": [
        {"name": "road", "embedding": "road.otf", "role": "positive"},
        {"name": "sky",  "embedding": "sky.otf",  "role": "negative"}
      ],
      "params": {"d": 16, "k": 4}          // optional config overrides
    }

Structural problems and missing referenced files raise FormatError; bad
parameter values raise ValidationError.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, ValidationError

DEFAULT_DEPTH_CAP = 150.0  # metres; applied when a config enables the cap


@dataclass
class PipelineConfig:
    """Knobs shared by the 2D and 3D paths."""

    d: int = 16
    k: int = 4
    c_r: int = 4
    v: float = 0.5
    tau: float = 0.5
    seed: int = 0
    depth_min: float = 0.0
    depth_max: float = math.inf
    refiner: Optional[str] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"config: d must be >= 1, got {self.d}")
        if self.k < 1:
            raise ValidationError(f"config: k must be >= 1, got {self.k}")
        if self.c_r < 1:
            raise ValidationError(f"config: c_r must be >= 1, got {self.c_r}")
        if self.v <= 0:
            raise ValidationError(f"config: voxel size must be positive, got {self.v}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"config: tau {self.tau} outside [0, 1]")
        if self.depth_min < 0 or self.depth_max < self.depth_min:
            raise ValidationError(
                f"config: bad depth range ({self.depth_min}, {self.depth_max})"
            )


# named parameter bundles; flags may override any field afterwards
PRESETS = {
    "small": {"d": 16},
    "large": {"d": 32},
    "spatial": {"d": 64, "v": 0.5},
}

_CONFIG_KEYS = {"d", "k", "c_r", "v", "tau", "seed", "depth_min", "depth_max", "refiner"}


def config_from(preset: Optional[str] = None, **overrides) -> PipelineConfig:
    """Build a config from an optional preset plus explicit overrides."""
    fields = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset '{preset}' (have {sorted(PRESETS)})")
        fields.update(PRESETS[preset])
    unknown = set(overrides) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys {sorted(unknown)}")
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**fields)


@dataclass(eq=False)
class FrameSpec:
    """Per-frame file references and geometry, paths already resolved."""

    vision_tokens: Path
    vl_tokens: Path
    image: Optional[Path] = None
    depth: Optional[Path] = None
    pose: Optional[np.ndarray] = None
    intrinsics: Optional[dict] = None
    gt_mask: Optional[Path] = None


@dataclass(eq=False)
class PromptSpec:
    """A named prompt embedding with its query role."""

    name: str
    embedding: Path
    role: str  # "positive" | "negative"


@dataclass(eq=False)
class SceneManifest:
    frames: list = field(default_factory=list)
    prompts: list = field(default_factory=list)
    params: dict = field(default_factory=dict)


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise FormatError(f"manifest: {where} is missing '{key}'")
    return obj[key]


def _resolve(base: Path, rel: str, where: str, must_exist: bool = True) -> Path:
    p = Path(rel)
    if not p.is_absolute():
        p = base / p
    if must_exist and not p.exists():
        raise FormatError(f"manifest: {where} references missing file {p}")
    return p


def _parse_pose(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != 16:
        raise FormatError(f"manifest: {where} pose must be 16 floats, got {raw!r:.80}")
    m = np.asarray(raw, dtype=np.float64).reshape(4, 4)
    if np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-6:
        raise FormatError(f"manifest: {where} pose bottom row must be (0,0,0,1), got {m[3].tolist()}")
    return m


def load_manifest(path) -> SceneManifest:
    """Parse and structurally validate a manifest file."""
    p = Path(path)
    if not p.exists():
        raise FormatError(f"manifest: no such file {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest: {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"manifest: top level must be an object, got {type(doc).__name__}")
    base = p.parent

    frames = []
    raw_frames = doc.get("frames", [])
    if not isinstance(raw_frames, list):
        raise FormatError("manifest: 'frames' must be a list")
    for i, rf in enumerate(raw_frames):
        where = f"frame {i}"
        if not isinstance(rf, dict):
            raise FormatError(f"manifest: {where} must be an object")
        frame = FrameSpec(
            vision_tokens=_resolve(base, _require(rf, "vision_tokens", where), where),
            vl_tokens=_resolve(base, _require(rf, "vl_tokens", where), where),
        )
        if "image" in rf:
            frame.image = _resolve(base, rf["image"], where)
        if "depth" in rf:
            frame.depth = _resolve(base, rf["depth"], where)
        if "pose" in rf:
            frame.pose = _parse_pose(rf["pose"], where)
        if "intrinsics" in rf:
            k = rf["intrinsics"]
            if not isinstance(k, dict) or not {"fx", "fy", "cx", "cy"} <= set(k):
                raise FormatError(f"manifest: {where} intrinsics need fx, fy, cx, cy")
            frame.intrinsics = {key: float(k[key]) for key in ("fx", "fy", "cx", "cy")}
        if "gt_mask" in rf:
            frame.gt_mask = _resolve(base, rf["gt_mask"], where)
        frames.append(frame)

    prompts = []
    raw_prompts = doc.get("prompts", [])
    if not isinstance(raw_prompts, list):
        raise FormatError("manifest: 'prompts' must be a list")
    for i, rp in enumerate(raw_prompts):
        where = f"prompt {i}"
        if not isinstance(rp, dict):
            raise FormatError(f"manifest: {where} must be an object")
        role = _require(rp, "role", where)
        if role not in ("positive", "negative"):
            raise FormatError(f"manifest: {where} role must be positive or negative, got '{role}'")
        prompts.append(
            PromptSpec(
                name=str(_require(rp, "name", where)),
                embedding=_resolve(base, _require(rp, "embedding", where), where),
                role=role,
            )
        )

    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise FormatError("manifest: 'params' must be an object")
    return SceneManifest(frames=frames, prompts=prompts, params=params)


def config_for_scene(scene: SceneManifest, preset: Optional[str] = None, **overrides) -> PipelineConfig:
    """Merge precedence: defaults < preset < manifest params < explicit overrides."""
    merged = dict(scene.params)
    unknown = set(merged) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"manifest params: unknown keys {sorted(unknown)}")
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return config_from(preset, **merged)

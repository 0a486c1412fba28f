"""Point-cloud export: binary little-endian PLY with per-vertex color.

Vertices carry x,y,z float32 plus uchar red,green,blue. Three coloring modes:

- "rgb": caller-supplied uint8 colors;
- "similarity": values in [0,1] mapped through the fixed 5-stop ramp below
  (dark blue → purple → pink → orange → yellow, linear between stops);
- "label": integer ids mapped to a fixed palette built by golden-angle hue
  stepping, so any two ids get visibly distinct colors.

A minimal reader for this exact layout is included so grids can be reloaded
for querying without re-reconstruction.
"""

from __future__ import annotations

from colorsys import hsv_to_rgb
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import FormatError, ValidationError

# packed vertex record: three float32 coordinates, three uchar color channels
_VERTEX_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("r", "u1"), ("g", "u1"), ("b", "u1")])

# (value stop, r, g, b) — fixed ramp for similarity coloring
SIMILARITY_STOPS = (
    (0.00, 13, 8, 135),
    (0.25, 126, 3, 168),
    (0.50, 204, 71, 120),
    (0.75, 248, 149, 64),
    (1.00, 240, 249, 33),
)

GOLDEN_ANGLE = 137.50776405003785  # degrees; consecutive hues never collide


def similarity_colors(values: np.ndarray) -> np.ndarray:
    """Map values in [0,1] to uint8 RGB via the fixed 5-stop ramp."""
    v = np.clip(np.asarray(values, dtype=np.float64).reshape(-1), 0.0, 1.0)
    stops = np.array([s[0] for s in SIMILARITY_STOPS])
    rgb_stops = np.array([s[1:] for s in SIMILARITY_STOPS], dtype=np.float64)
    out = np.empty((v.shape[0], 3), dtype=np.float64)
    for ch in range(3):
        out[:, ch] = np.interp(v, stops, rgb_stops[:, ch])
    return np.rint(out).astype(np.uint8)


def label_colors(labels: np.ndarray) -> np.ndarray:
    """Map non-negative integer ids to distinct uint8 RGB colors."""
    ids = np.asarray(labels, dtype=np.int64).reshape(-1)
    if ids.size and ids.min() < 0:
        raise ValidationError("label colors: ids must be non-negative")
    out = np.empty((ids.shape[0], 3), dtype=np.uint8)
    for i, lab in enumerate(ids):
        hue = (lab * GOLDEN_ANGLE) % 360.0 / 360.0
        r, g, b = hsv_to_rgb(hue, 0.75, 0.95)
        out[i] = (round(r * 255), round(g * 255), round(b * 255))
    return out


def _header(n: int) -> bytes:
    lines = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_ply(
    points: np.ndarray,
    path,
    mode: str = "rgb",
    colors: Optional[np.ndarray] = None,
    values: Optional[np.ndarray] = None,
    labels: Optional[np.ndarray] = None,
) -> None:
    """Write points with colors chosen by mode; empty geometry is an error."""
    pts = np.asarray(points, dtype="<f4")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"write_ply: points must be (n, 3), got {pts.shape}")
    n = pts.shape[0]
    if n == 0:
        raise ValidationError("write_ply: refusing to write empty geometry")

    if mode == "rgb":
        if colors is None:
            raise ValidationError("write_ply: rgb mode needs explicit colors")
        rgb = np.asarray(colors, dtype=np.uint8)
    elif mode == "similarity":
        if values is None:
            raise ValidationError("write_ply: similarity mode needs values")
        rgb = similarity_colors(values)
    elif mode == "label":
        if labels is None:
            raise ValidationError("write_ply: label mode needs labels")
        rgb = label_colors(labels)
    else:
        raise ValidationError(f"write_ply: unknown mode '{mode}'")
    if rgb.shape != (n, 3):
        raise ValidationError(f"write_ply: colors shape {rgb.shape} does not match {n} points")

    rec = np.empty(n, dtype=_VERTEX_DTYPE)
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    rec["r"], rec["g"], rec["b"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    with open(path, "wb") as f:
        f.write(_header(n))
        f.write(rec.tobytes())


def read_ply(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read back a file in exactly the layout write_ply produces."""
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if end < 0:
        raise FormatError(f"{path}: no end_header line")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(b"end_header\n"):]

    if not header or header[0] != "ply":
        raise FormatError(f"{path}: missing ply magic")
    if "format binary_little_endian 1.0" not in header:
        raise FormatError(f"{path}: not binary little-endian")
    n = None
    for line in header:
        if line.startswith("element vertex "):
            n = int(line.split()[-1])
    if n is None:
        raise FormatError(f"{path}: no vertex element")
    expected = [
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    props = [l for l in header if l.startswith("property")]
    if props != expected:
        raise FormatError(f"{path}: unsupported property layout {props}")

    size = _VERTEX_DTYPE.itemsize
    if len(body) != n * size:
        raise FormatError(f"{path}: body is {len(body)} bytes, expected {n * size}")
    rec = np.frombuffer(body, dtype=_VERTEX_DTYPE, count=n)
    pts = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float32)
    rgb = np.stack([rec["r"], rec["g"], rec["b"]], axis=1).astype(np.uint8)
    return pts, rgb

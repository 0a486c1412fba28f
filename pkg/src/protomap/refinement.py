"""Coarse-to-fine mask production.

The default path upsamples the normalized similarity map bilinearly to image
resolution and thresholds it. An external refiner (e.g. a frozen promptable
segmenter) can be plugged in through RefinerHook; when a hook fails the error
surfaces — there is no silent fallback to thresholding.

Subprocess hook protocol: the command is run as

    cmd <image_path> <similarity.otf> <out_mask.png>

where similarity.otf holds the upsampled H×W×1 map in tensor-file format and
the command must write an H×W PNG whose nonzero pixels mark the mask. Nonzero
exit status, missing output, or a size mismatch raise RefinerError.
"""

from __future__ import annotations

import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .alignment import SimilarityMap
from .errors import RefinerError, ValidationError
from .grids import FeatureMap, _bilinear


@dataclass(eq=False)
class BinaryMask:
    """A boolean H×W pixel mask."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=bool)
        if self.data.ndim != 2:
            raise ValidationError(f"binary mask must be 2-D, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(eq=False)
class ImageRef:
    """An image identified by path with known pixel dimensions."""

    path: Optional[str]
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"image size must be positive, got {self.height}x{self.width}")


@dataclass(eq=False)
class RefinerHook:
    """External mask refiner: (image, full-res similarity) -> BinaryMask.

    Calls are serialized through a per-instance lock unless the hook declares
    itself reentrant, since external refiners rarely tolerate concurrent use.
    """

    identifier: str
    fn: Callable[[ImageRef, FeatureMap], BinaryMask]
    reentrant: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def invoke(self, image: ImageRef, upsampled: FeatureMap) -> BinaryMask:
        if self.reentrant:
            return self.fn(image, upsampled)
        with self._lock:
            return self.fn(image, upsampled)


def upsample_similarity(s: SimilarityMap, height: int, width: int) -> FeatureMap:
    """Bilinearly upscale a normalized similarity map to H×W (single channel)."""
    if not s.normalized:
        raise ValidationError("upsample_similarity: similarity map must be normalized")
    if height < 1 or width < 1:
        raise ValidationError(f"upsample_similarity: target {height}x{width} is empty")
    up = _bilinear(s.data[:, :, None], height, width)
    # interpolation of values in [0,1] stays in [0,1] bar rounding; clamp the dust
    return FeatureMap(np.clip(up, 0.0, 1.0))


def threshold_mask(values, tau: float) -> BinaryMask:
    """Mask of cells whose value is >= tau; the comparison is inclusive so tau=1.0 is attainable."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"threshold_mask: tau {tau} outside [0, 1]")
    data = values.data if hasattr(values, "data") else np.asarray(values)
    plane = data[:, :, 0] if data.ndim == 3 else data
    if plane.size and (plane.min() < 0.0 or plane.max() > 1.0):
        raise ValidationError("threshold_mask: values outside [0, 1]; normalize first")
    return BinaryMask(plane >= tau)


def refine(
    image: ImageRef,
    s: SimilarityMap,
    hook: Optional[RefinerHook],
    tau: float,
) -> BinaryMask:
    """Produce the final image-resolution mask, via the hook when one is given."""
    up = upsample_similarity(s, image.height, image.width)
    if hook is None:
        return threshold_mask(up, tau)
    try:
        mask = hook.invoke(image, up)
    except RefinerError:
        raise
    except Exception as exc:
        raise RefinerError(hook.identifier, str(exc)) from exc
    if mask.height != image.height or mask.width != image.width:
        raise RefinerError(
            hook.identifier,
            f"returned {mask.height}x{mask.width} mask for {image.height}x{image.width} image",
        )
    return mask


def subprocess_hook(identifier: str, command: list[str], timeout: float = 60.0) -> RefinerHook:
    """Wrap an external command in the subprocess refiner protocol."""

    def run(image: ImageRef, upsampled: FeatureMap) -> BinaryMask:
        from PIL import Image

        from .otf import write_otf

        if image.path is None:
            raise RefinerError(identifier, "image has no path to hand to the subprocess")
        with tempfile.TemporaryDirectory(prefix="refiner_") as tmp:
            sim_path = Path(tmp) / "similarity.otf"
            out_path = Path(tmp) / "mask.png"
            write_otf(str(sim_path), upsampled.data)
            proc = subprocess.run(
                [*command, str(image.path), str(sim_path), str(out_path)],
                capture_output=True,
                timeout=timeout,
            )
            if proc.returncode != 0:
                tail = proc.stderr.decode(errors="replace").strip()[-200:]
                raise RefinerError(identifier, f"exit status {proc.returncode}: {tail}")
            if not out_path.exists():
                raise RefinerError(identifier, "produced no output mask")
            arr = np.asarray(Image.open(out_path).convert("L"))
        return BinaryMask(arr != 0)

    return RefinerHook(identifier=identifier, fn=run)

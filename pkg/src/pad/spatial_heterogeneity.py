"""Spatial-heterogeneity heat map from JPEG recompression residuals.

Re-encoding an image at a quality factor close to the one it was last
saved at barely changes it, while regions that came from a different
source quality keep moving. Sweeping a set of quality factors, picking the
one the image as a whole fits best, and mapping the per-pixel residual at
that quality highlights regions whose effective quality disagrees with
the rest of the image.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import CodecError
from .image_core import HeatMap, ImageBuffer, box_smooth

__all__ = [
    "DEFAULT_QUALITY_SWEEP",
    "CdConfig",
    "validate_quality",
    "recompress",
    "residual_map",
    "estimate_global_quality",
    "cd_heatmap",
]

DEFAULT_QUALITY_SWEEP = (30, 40, 50, 60, 70, 80, 90)


def validate_quality(q: int) -> int:
    """Check a JPEG quality factor and return it as an int."""
    qi = int(q)
    if qi != q or not 1 <= qi <= 100:
        raise ValueError(f"quality factor must be an integer in [1, 100], got {q!r}")
    return qi


@dataclass(frozen=True)
class CdConfig:
    """Knobs for the recompression heat map.

    ``smooth_side`` of None derives the box-filter side from the image as
    2 * (min(width, height) // kernel_divisor) + 1, floored at 3; an
    explicit value must be odd and >= 3. ``kernel_divisor`` mirrors the
    fusion stage's morphology divisor so both scale together.
    """

    sweep: tuple[int, ...] = DEFAULT_QUALITY_SWEEP
    smooth_side: int | None = None
    kernel_divisor: int = 80

    def __post_init__(self) -> None:
        sweep = tuple(validate_quality(q) for q in self.sweep)
        if not sweep:
            raise ValueError("quality sweep must be nonempty")
        if any(b <= a for a, b in zip(sweep, sweep[1:])):
            raise ValueError(f"quality sweep must be strictly increasing, got {sweep}")
        if self.smooth_side is not None and (
            self.smooth_side < 3 or self.smooth_side % 2 == 0
        ):
            raise ValueError(f"smooth side must be odd and >= 3, got {self.smooth_side}")
        if self.kernel_divisor < 1:
            raise ValueError("kernel divisor must be >= 1")
        object.__setattr__(self, "sweep", sweep)

    def resolve_smooth_side(self, width: int, height: int) -> int:
        if self.smooth_side is not None:
            return self.smooth_side
        return max(3, 2 * (min(width, height) // self.kernel_divisor) + 1)


def recompress(img: ImageBuffer, quality: int) -> ImageBuffer:
    """Round-trip the image through a baseline JPEG encode/decode.

    Encodes at the given quality factor with 4:4:4 sampling (no chroma
    subsampling) so the residual is purely quantization-driven, then
    decodes. Deterministic for a fixed codec build.
    """
    q = validate_quality(quality)
    try:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(img.pixels)).save(
            buf, format="JPEG", quality=q, subsampling=0
        )
        buf.seek(0)
        with Image.open(buf) as rec:
            out = np.asarray(rec.convert("RGB"), dtype=np.uint8)
    except ValueError:
        raise
    except Exception as exc:
        raise CodecError(f"JPEG round trip at quality {q} failed: {exc}") from exc
    if out.shape != img.pixels.shape:
        raise CodecError(
            f"codec changed dimensions {img.pixels.shape} -> {out.shape}"
        )
    return ImageBuffer(out)


def residual_map(orig: ImageBuffer, rec: ImageBuffer) -> HeatMap:
    """Per-pixel squared difference between two images, averaged over channels."""
    if (orig.width, orig.height) != (rec.width, rec.height):
        raise ValueError(
            f"dimension mismatch: {orig.width}x{orig.height} vs {rec.width}x{rec.height}"
        )
    diff = orig.pixels.astype(np.float64) - rec.pixels.astype(np.float64)
    return HeatMap((diff * diff).mean(axis=2))


def _smoothed_residual(img: ImageBuffer, quality: int, side: int) -> HeatMap:
    return box_smooth(residual_map(img, recompress(img, quality)), side)


def estimate_global_quality(img: ImageBuffer, cfg: CdConfig = CdConfig()) -> int:
    """Sweep member that best fits the image as a whole.

    Scores each candidate by the median over pixels of the smoothed
    residual; the median keeps a small patch from skewing the estimate.
    Ties break toward the highest quality so lossless inputs map to the
    top of the sweep.
    """
    side = cfg.resolve_smooth_side(img.width, img.height)
    best_quality = cfg.sweep[0]
    best_score = None
    for q in cfg.sweep:
        score = float(np.median(_smoothed_residual(img, q, side).values))
        if best_score is None or score <= best_score:
            best_score = score
            best_quality = q
    return best_quality


def cd_heatmap(img: ImageBuffer, cfg: CdConfig = CdConfig()) -> HeatMap:
    """Raw spatial-heterogeneity heat map (not normalized).

    High values mark regions whose effective quality differs from the
    globally estimated one.
    """
    side = cfg.resolve_smooth_side(img.width, img.height)
    smoothed = {}
    best_quality = cfg.sweep[0]
    best_score = None
    for q in cfg.sweep:
        smoothed[q] = _smoothed_residual(img, q, side)
        score = float(np.median(smoothed[q].values))
        if best_score is None or score <= best_score:
            best_score = score
            best_quality = q
    return smoothed[best_quality]

"""Heat-map fusion, adaptive thresholding, and binary morphology.

Combines the two raw heat maps into the patch localization mask: both maps
are min-max normalized to [0, 255], the mutual-information map is inverted
(low MI means independent, which is patch-like), the maps are blended by a
fixed weight, thresholded at an adaptive quantile, and cleaned up with an
OPEN-CLOSE-OPEN sequence whose kernel sizes scale with the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image_core import BinaryMask, HeatMap, _window_sums

__all__ = [
    "FusionConfig",
    "StructuringElement",
    "normalize_heatmap",
    "fuse",
    "fused_heatmap",
    "adaptive_threshold",
    "binarize",
    "morph_open",
    "morph_close",
    "localize",
]


@dataclass(frozen=True)
class FusionConfig:
    """Fusion weight, threshold quantile, and morphology kernel divisor.

    ``kernel_divisor`` sets the base kernel k = round(min(w, h) / divisor),
    floored at 1; the three morphology steps use square kernels of sides
    2k, k, and 3k.
    """

    mi_weight: float = 0.5
    threshold_quantile: float = 0.8
    kernel_divisor: float = 80.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.mi_weight <= 1.0:
            raise ValueError(f"mi weight must be in [0, 1], got {self.mi_weight}")
        if not 0.0 <= self.threshold_quantile < 1.0:
            raise ValueError(
                f"threshold quantile must be in [0, 1), got {self.threshold_quantile}"
            )
        if self.kernel_divisor < 1:
            raise ValueError(f"kernel divisor must be >= 1, got {self.kernel_divisor}")


@dataclass(frozen=True)
class StructuringElement:
    """Square all-ones structuring element.

    The anchor sits at index side // 2, so an even side spans one cell
    further up/left than down/right (the usual convention for even
    kernels).
    """

    side: int = 3

    def __post_init__(self) -> None:
        if self.side < 1:
            raise ValueError(f"structuring element side must be >= 1, got {self.side}")


def normalize_heatmap(h: HeatMap) -> HeatMap:
    """Min-max scale to [0, 255]; a constant map normalizes to all zeros."""
    v = h.values
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return HeatMap(np.zeros_like(v))
    return HeatMap((v - lo) / (hi - lo) * 255.0)


def fuse(h_mi_norm: HeatMap, h_cd_norm: HeatMap, mi_weight: float) -> HeatMap:
    """Weighted sum of two normalized heat maps.

    Callers must pass the mutual-information map already inverted
    (255 - normalized values) so that high heat means independent.
    """
    if not 0.0 <= mi_weight <= 1.0:
        raise ValueError(f"mi weight must be in [0, 1], got {mi_weight}")
    if (h_mi_norm.width, h_mi_norm.height) != (h_cd_norm.width, h_cd_norm.height):
        raise ValueError(
            f"dimension mismatch: {h_mi_norm.width}x{h_mi_norm.height} vs "
            f"{h_cd_norm.width}x{h_cd_norm.height}"
        )
    return HeatMap(mi_weight * h_mi_norm.values + (1.0 - mi_weight) * h_cd_norm.values)


def fused_heatmap(h_mi: HeatMap, h_cd: HeatMap, mi_weight: float) -> HeatMap:
    """Normalize both raw maps, invert the MI map, and blend them."""
    if (h_mi.width, h_mi.height) != (h_cd.width, h_cd.height):
        raise ValueError(
            f"dimension mismatch: {h_mi.width}x{h_mi.height} vs {h_cd.width}x{h_cd.height}"
        )
    inverted = HeatMap(255.0 - normalize_heatmap(h_mi).values)
    return fuse(inverted, normalize_heatmap(h_cd), mi_weight)


def adaptive_threshold(h: HeatMap, quantile: float) -> float:
    """Linear-interpolation quantile of the heat values.

    With S the values sorted ascending, n their count, i = floor((n-1) q)
    and j = (n-1) q - i, returns (1-j) S[i] + j S[i+1] (S[n-1] when i is
    the last index).
    """
    if not 0.0 <= quantile < 1.0:
        raise ValueError(f"quantile must be in [0, 1), got {quantile}")
    s = np.sort(h.values, axis=None)
    n = s.size
    pos = (n - 1) * quantile
    i = int(math.floor(pos))
    if i >= n - 1:
        return float(s[n - 1])
    j = pos - i
    return float((1.0 - j) * s[i] + j * s[i + 1])


def binarize(h: HeatMap, thresh: float) -> BinaryMask:
    """Mask of pixels at or above the threshold (equality survives)."""
    return BinaryMask(h.values >= thresh)


def _se_offsets(side: int) -> tuple[int, int]:
    # Window at (y, x) spans rows y-lo .. y+hi and likewise for columns.
    lo = side // 2
    hi = side - lo - 1
    return lo, hi


def _erode(bits: np.ndarray, side: int) -> np.ndarray:
    # A pixel survives iff every in-image cell under the element is set;
    # out-of-image cells count as set, so the image border does not erode
    # regions that touch it.
    lo, hi = _se_offsets(side)
    zeros_under, _ = _window_sums((~bits).astype(np.int64), lo, hi, lo, hi)
    return zeros_under == 0


def _dilate(bits: np.ndarray, side: int) -> np.ndarray:
    # A pixel is set iff any in-image cell under the element is set.
    lo, hi = _se_offsets(side)
    ones_under, _ = _window_sums(bits.astype(np.int64), lo, hi, lo, hi)
    return ones_under >= 1


def morph_open(m: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Erosion followed by dilation: removes specks and thin bridges."""
    return BinaryMask(_dilate(_erode(m.bits, se.side), se.side))


def morph_close(m: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Dilation followed by erosion: fills small holes and gaps."""
    return BinaryMask(_erode(_dilate(m.bits, se.side), se.side))


def localize(h_mi: HeatMap, h_cd: HeatMap, cfg: FusionConfig = FusionConfig()) -> BinaryMask:
    """Patch localization mask from the two raw heat maps.

    Normalizes both maps, inverts the MI map, blends, thresholds at the
    adaptive quantile, then applies open(2k), close(k), open(3k) with
    k = max(1, round(min(w, h) / kernel_divisor)).
    """
    fused = fused_heatmap(h_mi, h_cd, cfg.mi_weight)
    thresh = adaptive_threshold(fused, cfg.threshold_quantile)
    mask = binarize(fused, thresh)
    k = max(1, round(min(h_mi.width, h_mi.height) / cfg.kernel_divisor))
    mask = morph_open(mask, StructuringElement(2 * k))
    mask = morph_close(mask, StructuringElement(k))
    mask = morph_open(mask, StructuringElement(3 * k))
    return mask

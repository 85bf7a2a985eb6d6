"""Training-free region segmentation.

The builtin segmenter needs no weights: it median-cut quantizes the image
to a small palette and emits the connected components of each palette
class as region masks. That is enough to hand boundary-accurate regions
to a caller that only matches them against its own localization mask; a
heavier pretrained model can be dropped in behind the same interface.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage as ndi
from PIL import Image

__all__ = ["builtin_segment"]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def builtin_segment(
    pixels: np.ndarray,
    palette_colors: int = 8,
    max_regions: int = 64,
    min_area_fraction: float = 0.0005,
) -> list[np.ndarray]:
    """Segment an (h, w, 3) uint8 image into region masks.

    Deterministic for a fixed input. Regions smaller than
    ``min_area_fraction`` of the image (or 16 pixels, whichever is larger)
    are dropped; at most ``max_regions`` masks are returned, largest
    first.
    """
    im = Image.fromarray(np.asarray(pixels, dtype=np.uint8))
    quantized = im.quantize(
        colors=palette_colors,
        method=Image.Quantize.MEDIANCUT,
        dither=Image.Dither.NONE,
    )
    labels = np.asarray(quantized, dtype=np.int32)
    min_area = max(16, int(min_area_fraction * labels.size))
    regions = []
    for color in np.unique(labels):
        components, count = ndi.label(labels == color, structure=_EIGHT_CONNECTED)
        for index in range(1, count + 1):
            mask = components == index
            area = int(np.count_nonzero(mask))
            if area < min_area:
                continue
            first = int(np.flatnonzero(mask.ravel())[0])
            regions.append((-area, first, mask))
    regions.sort(key=lambda item: (item[0], item[1]))
    return [mask for _, _, mask in regions[:max_regions]]

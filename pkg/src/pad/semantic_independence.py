"""Semantic-independence heat map from windowed mutual information.

The image is tiled into non-overlapping windows. Each window's heat value
is the average mutual information between it and its existing up/down/left/
right neighbors, estimated from a joint histogram of positionally paired
pixels. Regions that share little information with their surroundings score
low; the fusion stage inverts the normalized map so those regions become
high heat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGridError, EmptyWindowError
from .image_core import GrayBuffer, HeatMap, ImageBuffer, to_grayscale

__all__ = [
    "MiConfig",
    "WindowGrid",
    "JointHistogram",
    "tile_grid",
    "joint_histogram",
    "mutual_information",
    "mi_heatmap",
]

Rect = tuple[int, int, int, int]  # (x, y, width, height)


@dataclass(frozen=True)
class MiConfig:
    """Knobs for the mutual-information heat map.

    ``flat_entropy_floor`` is in bits: windows whose own histogram entropy
    falls below it are treated as flat (blank sky, solid walls). A flat
    window has near-zero MI with everything, which would spuriously mark it
    as independent, so such windows receive the maximum observed heat value
    instead.
    """

    window_side: int = 32
    bins: int = 32
    flat_entropy_floor: float = 0.05

    def __post_init__(self) -> None:
        if self.window_side < 2:
            raise ValueError(f"window side must be >= 2, got {self.window_side}")
        if not 2 <= self.bins <= 256:
            raise ValueError(f"bins must be in [2, 256], got {self.bins}")
        if self.flat_entropy_floor < 0:
            raise ValueError("flat entropy floor must be >= 0")


@dataclass(frozen=True, eq=False)
class WindowGrid:
    """Non-overlapping tiling of an image with 4-neighborhood adjacency.

    ``tiles`` are (x, y, w, h) rectangles in row-major order; full tiles are
    window_side square, last-row/column tiles may be smaller. ``neighbors``
    holds, per tile, the indices of the tiles directly above, below, left,
    and right of it (only those that exist).
    """

    window_side: int
    tiles: tuple[Rect, ...]
    neighbors: tuple[tuple[int, ...], ...]
    rows: int = field(repr=False, default=0)
    cols: int = field(repr=False, default=0)


@dataclass(frozen=True, eq=False)
class JointHistogram:
    """Joint occurrence counts of paired pixel intensities in two windows."""

    bins: int
    counts: np.ndarray
    total: int

    def __post_init__(self) -> None:
        c = np.asarray(self.counts)
        if c.shape != (self.bins, self.bins):
            raise ValueError(f"expected {(self.bins, self.bins)} counts, got {c.shape}")
        if not np.issubdtype(c.dtype, np.integer):
            raise ValueError(f"counts must be integers, got dtype {c.dtype}")
        if c.min() < 0:
            raise ValueError("counts must be nonnegative")
        if self.total <= 0:
            raise ValueError("total must be positive")
        if int(c.sum()) != self.total:
            raise ValueError("counts must sum to total")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


def tile_grid(width: int, height: int, window_side: int) -> WindowGrid:
    """Tile a width x height image by rows and columns of the given stride.

    The last row/column is clipped to the image, so tiles partition the
    image exactly. Requires ``2 <= window_side <= min(width, height)``.
    """
    d = window_side
    if d < 2:
        raise ValueError(f"window side must be >= 2, got {d}")
    if d > min(width, height):
        raise ValueError(
            f"window side {d} exceeds image dimensions {width}x{height}"
        )
    cols = math.ceil(width / d)
    rows = math.ceil(height / d)
    tiles = []
    for r in range(rows):
        for c in range(cols):
            x, y = c * d, r * d
            tiles.append((x, y, min(d, width - x), min(d, height - y)))
    neighbors = []
    for r in range(rows):
        for c in range(cols):
            adj = []
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < rows and 0 <= cc < cols:
                    adj.append(rr * cols + cc)
            neighbors.append(tuple(adj))
    return WindowGrid(d, tuple(tiles), tuple(neighbors), rows=rows, cols=cols)


def joint_histogram(gray: GrayBuffer, a: Rect, b: Rect, bins: int) -> JointHistogram:
    """Joint histogram of two windows, pairing pixels at identical offsets.

    Both rectangles are first cropped (from their own top-left corners) to
    the common overlap size min(widths) x min(heights); each pixel pair
    (va, vb) then increments cell (va*bins//256, vb*bins//256).
    """
    if not 2 <= bins <= 256:
        raise ValueError(f"bins must be in [2, 256], got {bins}")
    for name, (x, y, w, h) in (("a", a), ("b", b)):
        if x < 0 or y < 0 or w < 0 or h < 0 or x + w > gray.width or y + h > gray.height:
            raise ValueError(f"window {name}={x, y, w, h} outside image bounds")
    cw = min(a[2], b[2])
    ch = min(a[3], b[3])
    if cw == 0 or ch == 0:
        raise EmptyWindowError(f"windows {a} and {b} share no overlap area")
    va = gray.data[a[1] : a[1] + ch, a[0] : a[0] + cw]
    vb = gray.data[b[1] : b[1] + ch, b[0] : b[0] + cw]
    ia = va.astype(np.int64) * bins // 256
    ib = vb.astype(np.int64) * bins // 256
    counts = np.bincount((ia * bins + ib).ravel(), minlength=bins * bins)
    return JointHistogram(bins, counts.reshape(bins, bins), cw * ch)


def mutual_information(jh: JointHistogram) -> float:
    """Mutual information of a joint histogram, in bits.

    Computes sum p(a,b) * log2(p(a,b) / (p(a) p(b))) over nonzero cells,
    with probabilities taken from the normalized counts. The result is
    clamped at zero: the exact value is never negative, but summation
    noise can land a hair below it.
    """
    counts = jh.counts
    n = jh.total
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    nz = counts > 0
    c = counts[nz].astype(np.float64)
    denom = (row[:, None] * col[None, :])[nz].astype(np.float64)
    mi = float(np.sum(c / n * np.log2(c * n / denom)))
    return mi if mi > 0.0 else 0.0


def _entropy_bits(values: np.ndarray, bins: int) -> float:
    """Shannon entropy of the window's own binned intensity histogram."""
    idx = values.astype(np.int64) * bins // 256
    counts = np.bincount(idx.ravel(), minlength=bins)
    p = counts[counts > 0] / values.size
    return float(-(p * np.log2(p)).sum())


def mi_heatmap(img: ImageBuffer, cfg: MiConfig = MiConfig()) -> HeatMap:
    """Raw semantic-independence heat map (not normalized or inverted).

    Every pixel of a tile receives the tile's average MI against its
    existing neighbors. Tiles flagged flat by ``flat_entropy_floor`` receive
    the maximum average observed on the image, which after the fusion
    stage's inversion makes them minimally patch-like.
    """
    grid = tile_grid(img.width, img.height, cfg.window_side)
    if len(grid.tiles) < 2:
        raise DegenerateGridError(
            f"image {img.width}x{img.height} yields a single "
            f"{cfg.window_side}px tile; no neighbors to compare"
        )
    gray = to_grayscale(img)
    ntiles = len(grid.tiles)
    averages = np.empty(ntiles)
    entropies = np.empty(ntiles)
    for i, rect in enumerate(grid.tiles):
        scores = [
            mutual_information(joint_histogram(gray, rect, grid.tiles[j], cfg.bins))
            for j in grid.neighbors[i]
        ]
        averages[i] = sum(scores) / len(scores)
        x, y, w, h = rect
        entropies[i] = _entropy_bits(gray.data[y : y + h, x : x + w], cfg.bins)
    peak = float(averages.max())
    heat = np.empty((img.height, img.width))
    for i, (x, y, w, h) in enumerate(grid.tiles):
        value = peak if entropies[i] < cfg.flat_entropy_floor else averages[i]
        heat[y : y + h, x : x + w] = value
    return HeatMap(heat)

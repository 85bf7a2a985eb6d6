"""Raster types, color conversion, box smoothing, and image file I/O.

The four value types wrap read-only numpy arrays in row-major layout, so
they are safe to share across threads. Every operation returns a new value
and never mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageIOError

__all__ = [
    "ImageBuffer",
    "GrayBuffer",
    "HeatMap",
    "BinaryMask",
    "to_grayscale",
    "box_smooth",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "save_gray",
]

# ITU-R BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])

# Pillow modes with more than 8 bits per sample; converting them would
# silently rescale, so they are rejected instead.
_DEEP_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


def _freeze(arr: np.ndarray) -> np.ndarray:
    """Return a C-contiguous read-only array, copying only when needed."""
    if not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)
    elif arr.flags.writeable:
        arr = arr.copy()
    if arr.flags.writeable:
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """8-bit RGB image; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) pixels, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got dtype {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 3


@dataclass(frozen=True, eq=False)
class GrayBuffer:
    """8-bit single-channel image; ``data`` has shape (height, width)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError(f"expected (height, width) data, got shape {d.shape}")
        if d.dtype != np.uint8:
            raise ValueError(f"expected uint8 data, got dtype {d.dtype}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        object.__setattr__(self, "data", _freeze(d))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class HeatMap:
    """Per-pixel nonnegative finite scores; ``values`` has shape (height, width)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"expected (height, width) values, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("heat map must be at least 1x1")
        if not np.all(np.isfinite(v)):
            raise ValueError("heat values must be finite")
        if float(v.min()) < 0.0:
            raise ValueError("heat values must be nonnegative")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel boolean region; ``bits`` has shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.dtype != np.bool_:
            b = b.astype(np.bool_)
        if b.ndim != 2:
            raise ValueError(f"expected (height, width) bits, got shape {b.shape}")
        if b.shape[0] < 1 or b.shape[1] < 1:
            raise ValueError("mask must be at least 1x1")
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        """Number of set pixels."""
        return int(np.count_nonzero(self.bits))


def to_grayscale(img: ImageBuffer) -> GrayBuffer:
    """Convert RGB to 8-bit luma using BT.601 weights, rounding half to even."""
    y = img.pixels.astype(np.float64) @ _LUMA
    return GrayBuffer(np.clip(np.rint(y), 0, 255).astype(np.uint8))


def _window_sums(arr: np.ndarray, above: int, below: int, left: int, right: int):
    """Per-pixel sums over windows [y-above, y+below] x [x-left, x+right].

    Windows are clipped at the array bounds; out-of-bounds cells contribute
    nothing. Returns ``(sums, counts)`` where ``counts`` is the number of
    in-bounds cells under each window. Uses an integral image, so the input
    dtype should be either float64 or a wide integer.
    """
    h, w = arr.shape
    ii = np.zeros((h + 1, w + 1), dtype=arr.dtype)
    ii[1:, 1:] = arr
    np.cumsum(ii[1:, 1:], axis=0, out=ii[1:, 1:])
    np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - above, 0, h)
    y1 = np.clip(ys + below + 1, 0, h)
    x0 = np.clip(xs - left, 0, w)
    x1 = np.clip(xs + right + 1, 0, w)
    sums = (
        ii[y1[:, None], x1[None, :]]
        - ii[y0[:, None], x1[None, :]]
        - ii[y1[:, None], x0[None, :]]
        + ii[y0[:, None], x0[None, :]]
    )
    counts = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums, counts


def box_smooth(h: HeatMap, side: int) -> HeatMap:
    """Mean filter over a side x side window, clipped at image borders.

    Border pixels average over the in-image cells only, so no padding bias
    is introduced. ``side`` must be odd and >= 1; side 1 is the identity.
    """
    if side < 1 or side % 2 == 0:
        raise ValueError(f"window side must be odd and >= 1, got {side}")
    vals = h.values
    if side == 1:
        return HeatMap(vals)
    r = side // 2
    sums, counts = _window_sums(vals, r, r, r, r)
    out = sums / counts
    # Integral-image rounding can leak a hair past the true range; the exact
    # mean of any window lies within [min, max] of the inputs.
    np.clip(out, vals.min(), vals.max(), out=out)
    return HeatMap(out)


def load_image(path) -> ImageBuffer:
    """Load a PNG or JPEG file as RGB.

    Grayscale and palette images are expanded to 3 channels; images deeper
    than 8 bits per sample are rejected.
    """
    p = Path(path)
    try:
        with Image.open(p) as im:
            if im.mode in _DEEP_MODES:
                raise ImageIOError(f"unsupported sample depth {im.mode!r}: {p}")
            rgb = im.convert("RGB")
    except ImageIOError:
        raise
    except FileNotFoundError as exc:
        raise ImageIOError(f"cannot read image: {p}") from exc
    except UnidentifiedImageError as exc:
        raise ImageIOError(f"unrecognized image format: {p}") from exc
    except Image.DecompressionBombError as exc:
        raise ImageIOError(f"image dimensions too large: {p}") from exc
    except OSError as exc:
        raise ImageIOError(f"cannot read image: {p}") from exc
    return ImageBuffer(np.asarray(rgb, dtype=np.uint8))


def save_image(img: ImageBuffer, path, quality: int | None = None) -> None:
    """Write a PNG (lossless) or JPEG file, chosen by extension.

    JPEG output uses 4:4:4 sampling at the given quality factor (default 95).
    """
    p = Path(path)
    suffix = p.suffix.lower()
    pil = Image.fromarray(np.asarray(img.pixels))
    try:
        if suffix == ".png":
            pil.save(p, format="PNG")
        elif suffix in (".jpg", ".jpeg"):
            q = 95 if quality is None else int(quality)
            if not 1 <= q <= 100:
                raise ValueError(f"JPEG quality must be in [1, 100], got {q}")
            pil.save(p, format="JPEG", quality=q, subsampling=0)
        else:
            raise ImageIOError(f"unsupported output format {suffix!r}: {p}")
    except (ImageIOError, ValueError):
        raise
    except OSError as exc:
        raise ImageIOError(f"cannot write image: {p}") from exc


def load_mask(path) -> BinaryMask:
    """Load a single-channel raster as a mask; any nonzero sample is set."""
    p = Path(path)
    try:
        with Image.open(p) as im:
            gray = im.convert("L")
    except FileNotFoundError as exc:
        raise ImageIOError(f"cannot read mask: {p}") from exc
    except UnidentifiedImageError as exc:
        raise ImageIOError(f"unrecognized image format: {p}") from exc
    except OSError as exc:
        raise ImageIOError(f"cannot read mask: {p}") from exc
    return BinaryMask(np.asarray(gray, dtype=np.uint8) != 0)


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask as a single-channel PNG: 0 = background, 255 = patch."""
    p = Path(path)
    if p.suffix.lower() != ".png":
        raise ImageIOError(f"masks are written as PNG, got {p.suffix!r}: {p}")
    samples = np.where(np.asarray(mask.bits), np.uint8(255), np.uint8(0))
    try:
        Image.fromarray(samples, mode="L").save(p, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write mask: {p}") from exc


def save_gray(gray: GrayBuffer, path) -> None:
    """Write an 8-bit grayscale PNG."""
    p = Path(path)
    if p.suffix.lower() != ".png":
        raise ImageIOError(f"grayscale rasters are written as PNG, got {p.suffix!r}: {p}")
    try:
        Image.fromarray(np.asarray(gray.data), mode="L").save(p, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write image: {p}") from exc

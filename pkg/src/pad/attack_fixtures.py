"""Synthetic adversarial-patch fixtures with exact ground truth.

Fixtures paste a rectangular patch into a base image and record the placed
rectangle as the ground-truth mask, so outside the mask the adversarial
image is bit-identical to the base. Three patch sources are supported:
seeded uniform noise, a crop of another image, and a quality-mismatched
round trip of the covered region through the JPEG codec. Transforms are
restricted to nearest-neighbor scaling by {0.5, 1, 2} and quarter-turn
rotations, which keeps the ground truth exactly rectangular.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .image_core import BinaryMask, ImageBuffer, save_image, save_mask
from .spatial_heterogeneity import recompress, validate_quality

__all__ = [
    "NoisePatch",
    "ImageCrop",
    "QualityMismatch",
    "PatchTransform",
    "PatchSpec",
    "Fixture",
    "compose_adversarial",
    "make_fixture_set",
    "write_manifest",
    "read_manifest",
    "synthetic_photo",
]

Rect = tuple[int, int, int, int]

_ALLOWED_SCALES = (0.5, 1.0, 2.0)
_ALLOWED_ROTATIONS = (0, 90, 180, 270)


@dataclass(frozen=True)
class NoisePatch:
    """Seeded i.i.d. uniform RGB noise of the given size."""

    seed: int
    width: int
    height: int

    kind = "noise"

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("noise patch must be at least 1x1")


@dataclass(frozen=True, eq=False)
class ImageCrop:
    """A rectangle cropped out of another image."""

    image: ImageBuffer
    rect: Rect

    kind = "crop"


@dataclass(frozen=True)
class QualityMismatch:
    """The base image's own rectangle, round-tripped through JPEG at
    the given quality before pasting back."""

    rect: Rect
    quality: int

    kind = "quality"

    def __post_init__(self) -> None:
        validate_quality(self.quality)


@dataclass(frozen=True)
class PatchTransform:
    """Nearest-neighbor scale and counterclockwise quarter-turn rotation."""

    scale: float = 1.0
    rotation_deg: int = 0

    def __post_init__(self) -> None:
        if self.scale not in _ALLOWED_SCALES:
            raise ValueError(f"scale must be one of {_ALLOWED_SCALES}, got {self.scale}")
        if self.rotation_deg not in _ALLOWED_ROTATIONS:
            raise ValueError(
                f"rotation must be one of {_ALLOWED_ROTATIONS}, got {self.rotation_deg}"
            )


@dataclass(frozen=True)
class PatchSpec:
    """Patch source, target location (top-left), and transform."""

    source: NoisePatch | ImageCrop | QualityMismatch
    location: tuple[int, int]
    transform: PatchTransform = PatchTransform()


@dataclass(frozen=True, eq=False)
class Fixture:
    """An adversarial image, its exact ground-truth mask, and metadata."""

    adversarial: ImageBuffer
    gt_mask: BinaryMask
    meta: dict = field(default_factory=dict)


def _crop(img: ImageBuffer, rect: Rect) -> np.ndarray:
    x, y, w, h = rect
    if w < 1 or h < 1:
        raise ValueError(f"crop rectangle must be at least 1x1, got {rect}")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ValueError(f"crop rectangle {rect} outside image {img.width}x{img.height}")
    return np.array(img.pixels[y : y + h, x : x + w])


def _patch_pixels(base: ImageBuffer, source) -> np.ndarray:
    if isinstance(source, NoisePatch):
        rng = np.random.default_rng(source.seed)
        return rng.integers(0, 256, (source.height, source.width, 3), dtype=np.uint8)
    if isinstance(source, ImageCrop):
        return _crop(source.image, source.rect)
    if isinstance(source, QualityMismatch):
        region = ImageBuffer(_crop(base, source.rect))
        return np.array(recompress(region, source.quality).pixels)
    raise TypeError(f"unknown patch source {type(source).__name__}")


def _transform(pixels: np.ndarray, t: PatchTransform) -> np.ndarray:
    out = pixels
    if t.scale == 0.5:
        out = out[::2, ::2]
        if out.shape[0] < 1 or out.shape[1] < 1:
            raise ValueError("patch too small to scale down")
    elif t.scale == 2.0:
        out = np.repeat(np.repeat(out, 2, axis=0), 2, axis=1)
    if t.rotation_deg:
        out = np.rot90(out, k=t.rotation_deg // 90)
    return np.ascontiguousarray(out)


def compose_adversarial(base: ImageBuffer, spec: PatchSpec) -> Fixture:
    """Paste the transformed patch into the base image.

    The ground-truth mask is exactly the placed rectangle; everything
    outside it is bit-identical to the base.
    """
    patch = _transform(_patch_pixels(base, spec.source), spec.transform)
    ph, pw = patch.shape[:2]
    x, y = spec.location
    if x < 0 or y < 0 or x + pw > base.width or y + ph > base.height:
        raise ValueError(
            f"patch {pw}x{ph} at {x, y} does not fit in {base.width}x{base.height}"
        )
    px = base.pixels.copy()
    px[y : y + ph, x : x + pw] = patch
    bits = np.zeros((base.height, base.width), dtype=bool)
    bits[y : y + ph, x : x + pw] = True
    meta = {
        "kind": spec.source.kind,
        "location": [x, y],
        "size": [pw, ph],
        "scale": spec.transform.scale,
        "rotation_deg": spec.transform.rotation_deg,
    }
    return Fixture(ImageBuffer(px), BinaryMask(bits), meta)


def _patch_dims(rng: np.random.Generator, width: int, height: int,
                area_range: tuple[float, float]) -> tuple[int, int]:
    """Pick patch width/height whose area fraction lies inside area_range."""
    lo, hi = area_range
    image_area = width * height
    frac = rng.uniform(lo, hi)
    aspect = rng.uniform(0.75, 4.0 / 3.0)
    pw = int(round(math.sqrt(frac * image_area * aspect)))
    pw = max(2, min(pw, width))
    ph = int(round(frac * image_area / pw))
    # Clamp back into the requested fraction band after rounding.
    ph = max(ph, math.ceil(lo * image_area / pw))
    ph = min(ph, math.floor(hi * image_area / pw), height)
    if not lo <= pw * ph / image_area <= hi:
        raise ValueError(f"cannot fit a {lo:.0%}..{hi:.0%} patch into {width}x{height}")
    return pw, ph


def make_fixture_set(
    bases: list[ImageBuffer],
    n: int,
    seed: int,
    out_dir=None,
    kinds: tuple[str, ...] = ("noise", "crop", "quality"),
    area_range: tuple[float, float] = (0.10, 0.20),
    base_quality: int = 80,
    patch_quality: int = 30,
):
    """Generate ``n`` fixtures, cycling patch kinds over the base images.

    Patch areas are uniform in ``area_range`` of the image area. Quality
    fixtures re-save their base at ``base_quality`` first and paste the
    covered region back after a round trip at ``patch_quality``, so the
    patch differs from its surroundings only in effective quality. The
    whole set is deterministic under ``seed`` (each fixture derives its
    own child seed). With ``out_dir`` set, images and ground-truth masks
    are written there as PNG along with a JSON-lines manifest; returns
    ``(fixtures, manifest_path or None)``.
    """
    if n < 1:
        raise ValueError(f"fixture count must be >= 1, got {n}")
    if not bases:
        raise ValueError("at least one base image is required")
    if not kinds or any(k not in ("noise", "crop", "quality") for k in kinds):
        raise ValueError(f"unknown fixture kinds {kinds!r}")
    children = np.random.SeedSequence(seed).spawn(n)
    fixtures = []
    for i in range(n):
        fixture_seed = int(children[i].generate_state(1, np.uint32)[0])
        rng = np.random.default_rng(fixture_seed)
        kind = kinds[i % len(kinds)]
        base = bases[i % len(bases)]
        if kind == "quality":
            base = recompress(base, base_quality)
        pw, ph = _patch_dims(rng, base.width, base.height, area_range)
        if kind == "quality":
            # Same-place paste, identity transform: only the quality differs.
            x = int(rng.integers(0, base.width - pw + 1))
            y = int(rng.integers(0, base.height - ph + 1))
            spec = PatchSpec(QualityMismatch((x, y, pw, ph), patch_quality), (x, y))
        else:
            rotation = int(rng.choice(_ALLOWED_ROTATIONS))
            rw, rh = (pw, ph) if rotation in (0, 180) else (ph, pw)
            if rw > base.width or rh > base.height:
                rotation = 0
                rw, rh = pw, ph
            x = int(rng.integers(0, base.width - rw + 1))
            y = int(rng.integers(0, base.height - rh + 1))
            transform = PatchTransform(rotation_deg=rotation)
            if kind == "noise":
                source = NoisePatch(fixture_seed, pw, ph)
            else:
                donor = bases[(i + 1) % len(bases)] if len(bases) > 1 else base
                cx = int(rng.integers(0, donor.width - pw + 1))
                cy = int(rng.integers(0, donor.height - ph + 1))
                source = ImageCrop(donor, (cx, cy, pw, ph))
            spec = PatchSpec(source, (x, y), transform)
        fx = compose_adversarial(base, spec)
        fx.meta.update({"seed": fixture_seed, "base_index": i % len(bases)})
        fixtures.append(fx)
    manifest_path = None
    if out_dir is not None:
        manifest_path = write_manifest(fixtures, out_dir)
    return fixtures, manifest_path


def write_manifest(fixtures, out_dir) -> Path:
    """Write fixture images, ground-truth masks, and the manifest.

    One JSON line per fixture: image path, ground-truth mask paths, patch
    kind, and fixture seed; paths are relative to the manifest directory.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.jsonl"
    with manifest_path.open("w", encoding="utf-8") as fh:
        for i, fx in enumerate(fixtures):
            image_name = f"fixture_{i:04d}.png"
            mask_name = f"fixture_{i:04d}.gt.0.png"
            save_image(fx.adversarial, out / image_name)
            save_mask(fx.gt_mask, out / mask_name)
            record = {
                "image": image_name,
                "masks": [mask_name],
                "kind": fx.meta.get("kind", "unknown"),
                "seed": fx.meta.get("seed", 0),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest_path


def read_manifest(path) -> list[dict]:
    """Read a JSON-lines fixture manifest."""
    p = Path(path)
    records = []
    with p.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{p}:{line_no}: invalid manifest line") from exc
            if "image" not in record or "masks" not in record:
                raise ValueError(f"{p}:{line_no}: manifest line lacks image/masks")
            records.append(record)
    return records


def _bilinear_resize(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    ys = np.linspace(0, a.shape[0] - 1, out_h)
    xs = np.linspace(0, a.shape[1] - 1, out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, a.shape[0] - 1)
    x1 = np.minimum(x0 + 1, a.shape[1] - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    return (
        a[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + a[np.ix_(y1, x0)] * fy * (1 - fx)
        + a[np.ix_(y0, x1)] * (1 - fy) * fx
        + a[np.ix_(y1, x1)] * fy * fx
    )


def synthetic_photo(width: int = 640, height: int = 480, seed: int = 0) -> ImageBuffer:
    """Seeded photograph-like image for fixtures and tests.

    Sums three spatial scales: a coarse gradient field, a mid texture at
    roughly 14 px scale, and faint per-pixel noise, mixed per channel.
    Neighboring regions share structure (as in natural photos), which is
    what the mutual-information stage keys on; the texture keeps local
    histograms from degenerating.
    """
    rng = np.random.default_rng(seed)
    coarse = _bilinear_resize(rng.uniform(-1, 1, (5, 6)), height, width)
    mid = _bilinear_resize(
        rng.uniform(-1, 1, (height // 14 + 2, width // 14 + 2)), height, width
    )
    out = np.empty((height, width, 3))
    for c in range(3):
        gain = rng.uniform(0.6, 1.0)
        offset = rng.uniform(-0.25, 0.25)
        fine = rng.normal(0.0, 1.0, (height, width))
        out[..., c] = gain * (0.8 * coarse + 0.5 * mid) + offset + 0.03 * fine
    out = (out - out.min()) / (out.max() - out.min()) * 235 + 10
    return ImageBuffer(np.clip(np.rint(out), 0, 255).astype(np.uint8))

"""Region matching, mask refinement, and patch removal.

The localization mask has good coverage but rough boundaries. A region
provider supplies candidate region masks (connected components of the
localization mask, mask files on disk, or a segmentation sidecar over
HTTP); every candidate whose intersection-over-area with the localization
mask clears a threshold is merged into the final patch mask, which is then
blacked out of the image.
"""

from __future__ import annotations

import base64
import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi
from PIL import Image

from .errors import ProtocolViolationError, ProviderError
from .image_core import BinaryMask, ImageBuffer, load_mask

__all__ = [
    "RegionProposalSet",
    "RegionProviderSpec",
    "connected_components",
    "ioa",
    "match_masks",
    "inpaint_black",
    "provide_regions",
    "rle_encode",
    "rle_decode",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class RegionProposalSet:
    """Candidate region masks, all image-sized and nonempty.

    ``source`` records which provider produced them.
    """

    masks: tuple[BinaryMask, ...]
    source: str

    def __post_init__(self) -> None:
        masks = tuple(self.masks)
        for m in masks:
            if (m.width, m.height) != (masks[0].width, masks[0].height):
                raise ValueError("proposal masks must share one size")
            if m.count == 0:
                raise ValueError("proposal masks must be nonempty")
        object.__setattr__(self, "masks", masks)

    def __len__(self) -> int:
        return len(self.masks)


@dataclass(frozen=True)
class RegionProviderSpec:
    """Which region provider to use: components, directory, or sidecar."""

    kind: str
    path: Path | None = None
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "components":
            if self.path is not None or self.endpoint is not None:
                raise ValueError("components provider takes no parameters")
        elif self.kind == "directory":
            if self.path is None or self.endpoint is not None:
                raise ValueError("directory provider needs a path")
            object.__setattr__(self, "path", Path(self.path))
        elif self.kind == "sidecar":
            if self.endpoint is None or self.path is not None:
                raise ValueError("sidecar provider needs an endpoint URL")
        else:
            raise ValueError(f"unknown provider kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "RegionProviderSpec":
        """Parse CLI syntax: ``components``, ``dir:PATH``, or ``sidecar:URL``."""
        if text == "components":
            return cls("components")
        kind, sep, rest = text.partition(":")
        if sep and rest:
            if kind == "dir":
                return cls("directory", path=Path(rest))
            if kind == "sidecar":
                return cls("sidecar", endpoint=rest)
        raise ValueError(
            f"cannot parse provider {text!r}; expected "
            "'components', 'dir:PATH', or 'sidecar:URL'"
        )

    def describe(self) -> str:
        if self.kind == "directory":
            return f"dir:{self.path}"
        if self.kind == "sidecar":
            return f"sidecar:{self.endpoint}"
        return "components"


def connected_components(m: BinaryMask) -> RegionProposalSet:
    """8-connectivity components of a mask, each as its own full-size mask.

    Components are ordered by the row-major position of their first pixel
    (top row first, then column).
    """
    labeled, n = ndi.label(m.bits, structure=_EIGHT_CONNECTED)
    if n == 0:
        return RegionProposalSet((), "components")
    flat = labeled.ravel()
    values, first = np.unique(flat, return_index=True)
    order = sorted(
        (int(first[i]), int(v)) for i, v in enumerate(values) if v != 0
    )
    masks = tuple(BinaryMask(labeled == label) for _, label in order)
    return RegionProposalSet(masks, "components")


def ioa(mask: BinaryMask, h_p: BinaryMask) -> float:
    """Intersection over area: |mask & h_p| / |mask|."""
    if (mask.width, mask.height) != (h_p.width, h_p.height):
        raise ValueError(
            f"dimension mismatch: {mask.width}x{mask.height} vs {h_p.width}x{h_p.height}"
        )
    area = mask.count
    if area == 0:
        raise ValueError("IoA of an empty mask is undefined")
    inter = int(np.count_nonzero(mask.bits & h_p.bits))
    return inter / area


def match_masks(
    proposals: RegionProposalSet, h_p: BinaryMask, match_threshold: float = 0.5
) -> BinaryMask:
    """Union of all proposals whose IoA with the localization mask clears
    the threshold (inclusive).

    When the proposal set is empty or nothing matches, the localization
    mask itself is returned: the providers only refine boundaries, and
    failing open would drop the defense entirely.
    """
    if not 0.0 <= match_threshold <= 1.0:
        raise ValueError(f"match threshold must be in [0, 1], got {match_threshold}")
    selected = [m for m in proposals.masks if ioa(m, h_p) >= match_threshold]
    if not selected:
        return BinaryMask(h_p.bits)
    union = np.zeros_like(h_p.bits)
    for m in selected:
        union |= m.bits
    return BinaryMask(union)


def inpaint_black(img: ImageBuffer, mask: BinaryMask) -> ImageBuffer:
    """Set every masked pixel to black; unmasked pixels are untouched."""
    if (img.width, img.height) != (mask.width, mask.height):
        raise ValueError(
            f"dimension mismatch: {img.width}x{img.height} vs {mask.width}x{mask.height}"
        )
    px = img.pixels.copy()
    px[mask.bits] = 0
    return ImageBuffer(px)


def rle_encode(mask: BinaryMask) -> list[list[int]]:
    """Run-length encode set pixels over the row-major flattening.

    Returns [start, length] pairs with ascending, non-overlapping starts.
    """
    flat = mask.bits.ravel()
    padded = np.concatenate(([False], flat, [False])).astype(np.int8)
    delta = np.diff(padded)
    starts = np.flatnonzero(delta == 1)
    ends = np.flatnonzero(delta == -1)
    return [[int(s), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs, width: int, height: int) -> BinaryMask:
    """Decode [start, length] runs into a width x height mask.

    Raises ProtocolViolationError when runs are malformed, unsorted,
    overlapping, or exceed the pixel count.
    """
    total = width * height
    flat = np.zeros(total, dtype=bool)
    prev_end = 0
    for run in runs:
        try:
            start, length = int(run[0]), int(run[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise ProtocolViolationError(f"malformed RLE run {run!r}") from exc
        if length < 1 or start < 0:
            raise ProtocolViolationError(f"invalid RLE run {run!r}")
        if start < prev_end:
            raise ProtocolViolationError("RLE runs must be sorted and non-overlapping")
        if start + length > total:
            raise ProtocolViolationError(
                f"RLE run {run!r} exceeds mask size {width}x{height}"
            )
        flat[start : start + length] = True
        prev_end = start + length
    return BinaryMask(flat.reshape(height, width))


def _mask_files(directory: Path, stem: str) -> list[Path]:
    pattern = re.compile(re.escape(stem) + r"\.mask\.(\d+)\.png\Z")
    found = []
    for entry in directory.iterdir():
        match = pattern.fullmatch(entry.name)
        if match:
            found.append((int(match.group(1)), entry))
    return [p for _, p in sorted(found)]


def _directory_regions(
    spec: RegionProviderSpec, img: ImageBuffer, image_stem: str | None
) -> RegionProposalSet:
    if image_stem is None:
        raise ProviderError("directory", "an image stem is required to locate mask files")
    directory = spec.path
    if not directory.is_dir():
        raise ProviderError("directory", f"not a readable directory: {directory}")
    masks = []
    for path in _mask_files(directory, image_stem):
        mask = load_mask(path)
        if (mask.width, mask.height) != (img.width, img.height):
            raise ProviderError(
                "directory",
                f"mask {path.name} is {mask.width}x{mask.height}, "
                f"image is {img.width}x{img.height}",
            )
        if mask.count > 0:
            masks.append(mask)
    return RegionProposalSet(tuple(masks), "directory")


def _sidecar_regions(
    spec: RegionProviderSpec, img: ImageBuffer, timeout_s: float
) -> RegionProposalSet:
    import requests

    buf = io.BytesIO()
    Image.fromarray(np.asarray(img.pixels)).save(buf, format="PNG")
    payload = {
        "width": img.width,
        "height": img.height,
        "image_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
    }
    url = spec.endpoint.rstrip("/") + "/segment"
    try:
        resp = requests.post(url, json=payload, timeout=timeout_s)
    except requests.RequestException as exc:
        raise ProviderError("sidecar", f"request to {url} failed: {exc}") from exc
    if resp.status_code != 200:
        raise ProviderError("sidecar", f"{url} answered HTTP {resp.status_code}")
    try:
        body = resp.json()
    except ValueError as exc:
        raise ProtocolViolationError("response body is not JSON") from exc
    if not isinstance(body, dict) or not isinstance(body.get("masks"), list):
        raise ProtocolViolationError('response must be {"masks": [...]}')
    masks = []
    for entry in body["masks"]:
        if not isinstance(entry, dict) or "rle" not in entry:
            raise ProtocolViolationError(f"mask entry {entry!r} lacks an 'rle' field")
        mask = rle_decode(entry["rle"], img.width, img.height)
        if mask.count > 0:
            masks.append(mask)
    return RegionProposalSet(tuple(masks), "sidecar")


def provide_regions(
    spec: RegionProviderSpec,
    img: ImageBuffer,
    h_p: BinaryMask,
    image_stem: str | None = None,
    timeout_s: float = 30.0,
) -> RegionProposalSet:
    """Fetch region proposals for an image from the configured provider.

    ``components`` splits the localization mask into its 8-connected
    components. ``directory`` loads ``<image_stem>.mask.<N>.png`` files.
    ``sidecar`` posts the image to a segmentation service and decodes the
    returned run-length masks. Empty candidate masks are dropped.
    """
    if spec.kind == "components":
        return connected_components(h_p)
    if spec.kind == "directory":
        return _directory_regions(spec, img, image_stem)
    return _sidecar_regions(spec, img, timeout_s)

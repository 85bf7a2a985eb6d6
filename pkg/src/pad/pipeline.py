"""End-to-end defense pipeline and its configuration.

``defend_image`` wires the full chain: both heat maps, fusion into the
localization mask, region proposals, mask matching, and black inpainting.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ProviderError
from .fusion import FusionConfig, fused_heatmap, localize, normalize_heatmap
from .image_core import BinaryMask, GrayBuffer, HeatMap, ImageBuffer, save_gray
from .mask_refinement import (
    RegionProviderSpec,
    connected_components,
    inpaint_black,
    match_masks,
    provide_regions,
)
from .semantic_independence import MiConfig, mi_heatmap
from .spatial_heterogeneity import CdConfig, cd_heatmap

__all__ = ["RunConfig", "DefendResult", "defend_image", "export_heatmaps"]

# A localization mask covering more than this fraction of the image means
# the heat maps were degenerate (near-constant fusion keeps everything, as
# on blank or perfectly homogeneous inputs); real patches cover a small
# fraction. Such masks are treated as "no patch found" before the provider
# stage runs.
DEGENERATE_COVERAGE_FRACTION = 0.5


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the pipeline in one place."""

    mi: MiConfig = field(default_factory=MiConfig)
    cd: CdConfig = field(default_factory=CdConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    match_threshold: float = 0.5
    provider: RegionProviderSpec = field(
        default_factory=lambda: RegionProviderSpec("components")
    )
    timeout_s: float = 30.0
    heatmaps_dir: Path | None = None
    jobs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.match_threshold <= 1.0:
            raise ValueError(
                f"match threshold must be in [0, 1], got {self.match_threshold}"
            )
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def snapshot(self) -> dict:
        """Effective settings as a flat mapping with CLI flag names."""
        return {
            "r-mi": self.fusion.mi_weight,
            "p": self.fusion.threshold_quantile,
            "t-m": self.match_threshold,
            "delta": self.fusion.kernel_divisor,
            "window": self.mi.window_side,
            "bins": self.mi.bins,
            "qualities": ",".join(str(q) for q in self.cd.sweep),
            "provider": self.provider.describe(),
            "timeout-s": self.timeout_s,
            "heatmaps-dir": str(self.heatmaps_dir) if self.heatmaps_dir else None,
            "jobs": self.jobs,
            "seed": self.seed,
        }

    @classmethod
    def from_mapping(cls, options: dict) -> "RunConfig":
        """Build a config from flag-named options (unknown keys rejected)."""
        known = {
            "r-mi", "p", "t-m", "delta", "window", "bins", "qualities",
            "provider", "timeout-s", "heatmaps-dir", "jobs", "seed",
        }
        unknown = set(options) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")

        def pick(key, default):
            value = options.get(key)
            return default if value is None else value

        delta = float(pick("delta", 80))
        sweep = pick("qualities", None)
        if isinstance(sweep, str):
            sweep = tuple(int(part) for part in sweep.split(",") if part.strip())
        elif sweep is not None:
            sweep = tuple(int(q) for q in sweep)
        provider = pick("provider", "components")
        if isinstance(provider, str):
            provider = RegionProviderSpec.parse(provider)
        heatmaps_dir = pick("heatmaps-dir", None)
        return cls(
            mi=MiConfig(
                window_side=int(pick("window", 32)),
                bins=int(pick("bins", 32)),
            ),
            cd=CdConfig(
                sweep=sweep if sweep is not None else CdConfig().sweep,
                kernel_divisor=max(1, int(delta)),
            ),
            fusion=FusionConfig(
                mi_weight=float(pick("r-mi", 0.5)),
                threshold_quantile=float(pick("p", 0.8)),
                kernel_divisor=delta,
            ),
            match_threshold=float(pick("t-m", 0.5)),
            provider=provider,
            timeout_s=float(pick("timeout-s", 30.0)),
            heatmaps_dir=Path(heatmaps_dir) if heatmaps_dir else None,
            jobs=int(pick("jobs", 1)),
            seed=int(pick("seed", 0)),
        )


@dataclass(frozen=True, eq=False)
class DefendResult:
    """Everything the pipeline produced for one image."""

    defended: ImageBuffer
    final_mask: BinaryMask
    h_mi: HeatMap
    h_cd: HeatMap
    h_fuse: HeatMap
    h_p: BinaryMask
    degenerate: bool = False


def defend_image(
    img: ImageBuffer, cfg: RunConfig = RunConfig(), image_stem: str | None = None
) -> DefendResult:
    """Run the full localization-and-removal pipeline on one image.

    When the provider fails (unreachable sidecar, bad directory), the
    pipeline degrades to connected components of the localization mask and
    keeps going; a warning lands on stderr.
    """
    h_mi = mi_heatmap(img, cfg.mi)
    h_cd = cd_heatmap(img, cfg.cd)
    h_fuse = fused_heatmap(h_mi, h_cd, cfg.fusion.mi_weight)
    h_p = localize(h_mi, h_cd, cfg.fusion)
    coverage = h_p.count / (h_p.width * h_p.height)
    if coverage > DEGENERATE_COVERAGE_FRACTION:
        empty = BinaryMask(np.zeros((img.height, img.width), dtype=bool))
        return DefendResult(img, empty, h_mi, h_cd, h_fuse, h_p, degenerate=True)
    try:
        proposals = provide_regions(
            cfg.provider, img, h_p, image_stem=image_stem, timeout_s=cfg.timeout_s
        )
    except ProviderError as exc:
        print(f"warning: {exc}; falling back to components", file=sys.stderr)
        proposals = connected_components(h_p)
    final = match_masks(proposals, h_p, cfg.match_threshold)
    return DefendResult(inpaint_black(img, final), final, h_mi, h_cd, h_fuse, h_p)


def _heat_to_gray(h: HeatMap) -> GrayBuffer:
    normalized = normalize_heatmap(h).values
    return GrayBuffer(np.clip(np.rint(normalized), 0, 255).astype(np.uint8))


def export_heatmaps(result: DefendResult, stem: str, out_dir) -> list[Path]:
    """Write normalized grayscale exports of every pipeline stage."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, heat in (
        ("h_mi", result.h_mi),
        ("h_cd", result.h_cd),
        ("h_fuse", result.h_fuse),
    ):
        path = out / f"{stem}.{name}.png"
        save_gray(_heat_to_gray(heat), path)
        written.append(path)
    path = out / f"{stem}.h_p.png"
    data = np.where(np.asarray(result.h_p.bits), np.uint8(255), np.uint8(0))
    save_gray(GrayBuffer(data), path)
    written.append(path)
    return written

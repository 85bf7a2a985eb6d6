"""Localization scoring against ground truth, plus the batch runner.

The headline metric is patch localization recall: a ground-truth patch
counts as found when the defense mask covers at least half of it
(IoA >= 0.5), and recall pools the flags over every patch in the set.
Pixel-level precision/recall/IoU are reported as diagnostics, since a
defense could trivially inflate patch recall by masking everything.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack_fixtures import read_manifest
from .errors import PadError
from .image_core import BinaryMask, load_image, load_mask
from .mask_refinement import ioa
from .pipeline import RunConfig, defend_image

__all__ = [
    "EvalRecord",
    "EvalReport",
    "patch_flag",
    "recall_patch",
    "pixel_metrics",
    "run_eval",
    "report_to_json",
    "report_to_table",
]


@dataclass(frozen=True)
class EvalRecord:
    """Per-image scores; ``error`` is set when the pipeline failed."""

    image_id: str
    flags: tuple[int, ...] = ()
    precision: float = 0.0
    recall: float = 0.0
    iou: float = 0.0
    masked_fraction: float = 0.0
    error: str | None = None


@dataclass(frozen=True)
class EvalReport:
    """Aggregate localization metrics plus the effective configuration."""

    records: tuple[EvalRecord, ...]
    recall_patch: float
    mean_precision: float
    mean_recall: float
    mean_iou: float
    failures: int
    config: dict = field(default_factory=dict)


def patch_flag(gt: BinaryMask, defense: BinaryMask) -> int:
    """1 when the defense mask covers at least half the ground-truth patch."""
    if gt.count == 0:
        raise ValueError("ground-truth mask must be nonempty")
    return 1 if ioa(gt, defense) >= 0.5 else 0


def recall_patch(flags) -> float:
    """Mean of the per-patch flags, pooled over the whole set."""
    flags = list(flags)
    if not flags:
        raise ValueError("recall over zero patches is undefined")
    return sum(flags) / len(flags)


def pixel_metrics(gt_union: BinaryMask, defense: BinaryMask) -> tuple[float, float, float]:
    """Pixel precision, recall, and IoU of the defense mask.

    Empty-denominator conventions: precision is 1 for an empty defense
    mask, recall is 1 for empty ground truth, IoU is 1 when both are empty.
    """
    if (gt_union.width, gt_union.height) != (defense.width, defense.height):
        raise ValueError(
            f"dimension mismatch: {gt_union.width}x{gt_union.height} vs "
            f"{defense.width}x{defense.height}"
        )
    gt = gt_union.bits
    df = defense.bits
    tp = int(np.count_nonzero(gt & df))
    n_gt = gt_union.count
    n_df = defense.count
    union = n_gt + n_df - tp
    precision = 1.0 if n_df == 0 else tp / n_df
    recall = 1.0 if n_gt == 0 else tp / n_gt
    iou = 1.0 if union == 0 else tp / union
    return precision, recall, iou


def _evaluate_entry(entry: dict, root: Path, cfg: RunConfig) -> EvalRecord:
    image_id = str(entry["image"])
    try:
        img = load_image(root / image_id)
        gt_masks = [load_mask(root / m) for m in entry["masks"]]
        if not gt_masks:
            raise ValueError(f"{image_id}: no ground-truth masks listed")
        stem = Path(image_id).name
        for suffix in (".png", ".jpg", ".jpeg"):
            if stem.lower().endswith(suffix):
                stem = stem[: -len(suffix)]
                break
        result = defend_image(img, cfg, image_stem=stem)
        flags = tuple(patch_flag(gt, result.final_mask) for gt in gt_masks)
        union = np.zeros_like(gt_masks[0].bits)
        for gt in gt_masks:
            union |= gt.bits
        precision, recall, iou = pixel_metrics(BinaryMask(union), result.final_mask)
        masked = result.final_mask.count / (img.width * img.height)
        return EvalRecord(image_id, flags, precision, recall, iou, masked)
    except (PadError, ValueError, OSError) as exc:
        return EvalRecord(image_id, error=f"{type(exc).__name__}: {exc}")


def run_eval(manifest_path, cfg: RunConfig = RunConfig(), jobs: int | None = None) -> EvalReport:
    """Defend and score every image in a fixture manifest.

    Per-image failures are recorded and the run continues. Deterministic
    for the components and directory providers. ``jobs`` overrides
    ``cfg.jobs`` when given; outputs do not depend on the level of
    parallelism.
    """
    manifest_path = Path(manifest_path)
    entries = read_manifest(manifest_path)
    if not entries:
        raise ValueError(f"manifest {manifest_path} lists no images")
    root = manifest_path.parent
    workers = cfg.jobs if jobs is None else jobs
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda e: _evaluate_entry(e, root, cfg), entries))
    else:
        records = [_evaluate_entry(e, root, cfg) for e in entries]
    scored = [r for r in records if r.error is None]
    all_flags = [f for r in scored for f in r.flags]
    if not all_flags:
        raise ValueError("no ground-truth patches could be scored")
    return EvalReport(
        records=tuple(records),
        recall_patch=recall_patch(all_flags),
        mean_precision=float(np.mean([r.precision for r in scored])),
        mean_recall=float(np.mean([r.recall for r in scored])),
        mean_iou=float(np.mean([r.iou for r in scored])),
        failures=len(records) - len(scored),
        config=dict(cfg.snapshot()),
    )


def report_to_json(report: EvalReport) -> str:
    """Serialize a report deterministically (stable key order, no timestamps)."""
    payload = {
        "config": report.config,
        "recall_patch": report.recall_patch,
        "mean_precision": report.mean_precision,
        "mean_recall": report.mean_recall,
        "mean_iou": report.mean_iou,
        "failures": report.failures,
        "records": [
            {
                "image": r.image_id,
                "flags": list(r.flags),
                "precision": r.precision,
                "recall": r.recall,
                "iou": r.iou,
                "masked_fraction": r.masked_fraction,
                "error": r.error,
            }
            for r in report.records
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_to_table(report: EvalReport) -> str:
    """Plain-text table for terminals."""
    lines = [
        f"{'image':<28} {'flags':>7} {'prec':>6} {'rec':>6} {'iou':>6} {'masked':>7}",
        "-" * 64,
    ]
    for r in report.records:
        if r.error is not None:
            lines.append(f"{r.image_id:<28} FAILED  {r.error}")
            continue
        flags = f"{sum(r.flags)}/{len(r.flags)}"
        lines.append(
            f"{r.image_id:<28} {flags:>7} {r.precision:>6.3f} {r.recall:>6.3f} "
            f"{r.iou:>6.3f} {r.masked_fraction:>7.3%}"
        )
    lines.append("-" * 64)
    lines.append(
        f"recall_patch={report.recall_patch:.4f}  "
        f"mean precision={report.mean_precision:.3f} recall={report.mean_recall:.3f} "
        f"iou={report.mean_iou:.3f}  failures={report.failures}"
    )
    return "\n".join(lines) + "\n"

"""Command-line entry points: defend, heatmap, synth, eval.

Every pipeline flag has a config-file equivalent: a flat JSON object whose
keys match the flag names (kebab-case, no leading dashes). Precedence is
defaults < config file < explicit flags; the config file comes from
``--config`` or the ``PAD_CONFIG`` environment variable. The effective
configuration is echoed into every evaluation report.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .attack_fixtures import make_fixture_set, synthetic_photo
from .errors import PadError
from .evaluation import report_to_json, report_to_table, run_eval
from .image_core import load_image, save_image, save_mask
from .pipeline import RunConfig, defend_image, export_heatmaps

_CONFIG_KEYS = (
    "r-mi", "p", "t-m", "delta", "window", "bins", "qualities",
    "provider", "timeout-s", "heatmaps-dir", "jobs", "seed",
)


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("pipeline")
    g.add_argument("--r-mi", type=float, default=None,
                   help="weight of the mutual-information map in fusion (default 0.5)")
    g.add_argument("--p", type=float, default=None,
                   help="adaptive threshold quantile (default 0.8)")
    g.add_argument("--t-m", type=float, default=None,
                   help="IoA threshold for mask matching (default 0.5)")
    g.add_argument("--delta", type=float, default=None,
                   help="morphology kernel divisor (default 80)")
    g.add_argument("--window", type=int, default=None,
                   help="mutual-information window side in pixels (default 32)")
    g.add_argument("--bins", type=int, default=None,
                   help="histogram bins for mutual information (default 32)")
    g.add_argument("--qualities", type=str, default=None,
                   help="comma-separated JPEG quality sweep (default 30,40,...,90)")
    g.add_argument("--provider", type=str, default=None,
                   help="region provider: components | dir:PATH | sidecar:URL")
    g.add_argument("--timeout-s", type=float, default=None,
                   help="sidecar request timeout in seconds (default 30)")
    g.add_argument("--heatmaps-dir", type=str, default=None,
                   help="directory for debug heat-map exports")
    g.add_argument("--jobs", type=int, default=None,
                   help="parallel images per batch (default 1)")
    g.add_argument("--seed", type=int, default=None,
                   help="seed for fixture synthesis (default 0)")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON config file (or set PAD_CONFIG)")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        path = os.environ.get("PAD_CONFIG")
    if not path:
        return {}
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SystemExit(f"error: config file not found: {p}")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: config file {p} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise SystemExit(f"error: config file {p} must hold a JSON object")
    unknown = set(data) - set(_CONFIG_KEYS)
    if unknown:
        raise SystemExit(f"error: config file {p} has unknown keys: {sorted(unknown)}")
    return data


def _effective_config(args: argparse.Namespace) -> RunConfig:
    options = _load_config_file(args.config)
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            options[key] = flag_value
    try:
        return RunConfig.from_mapping(options)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")


def _stem(path: Path) -> str:
    return path.stem


def _defend_one(path: Path, cfg: RunConfig, out_dir: Path) -> str:
    img = load_image(path)
    result = defend_image(img, cfg, image_stem=_stem(path))
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(result.defended, out_dir / f"{_stem(path)}.defended.png")
    save_mask(result.final_mask, out_dir / f"{_stem(path)}.mask.png")
    if cfg.heatmaps_dir is not None:
        export_heatmaps(result, _stem(path), cfg.heatmaps_dir)
    masked = result.final_mask.count / (img.width * img.height)
    return f"{path.name}: masked {masked:.2%}"


def cmd_defend(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    inputs = [Path(p) for p in args.inputs]
    for p in inputs:
        if not p.is_file():
            print(f"error: input not found: {p}", file=sys.stderr)
            return 2
    out_dir = Path(args.out_dir)
    try:
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                lines = list(pool.map(lambda p: _defend_one(p, cfg, out_dir), inputs))
        else:
            lines = [_defend_one(p, cfg, out_dir) for p in inputs]
    except PadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    inputs = [Path(p) for p in args.inputs]
    for p in inputs:
        if not p.is_file():
            print(f"error: input not found: {p}", file=sys.stderr)
            return 2
    out_dir = Path(args.out_dir)
    try:
        for p in inputs:
            img = load_image(p)
            result = defend_image(img, cfg, image_stem=_stem(p))
            written = export_heatmaps(result, _stem(p), out_dir)
            print(f"{p.name}: wrote {len(written)} rasters to {out_dir}")
    except PadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    try:
        if args.bases:
            bases = [load_image(p) for p in args.bases]
        else:
            bases = [
                synthetic_photo(seed=cfg.seed + i)
                for i in range(args.synthetic_bases)
            ]
        _, manifest = make_fixture_set(bases, args.n, cfg.seed, out_dir=args.out_dir)
    except (PadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.n} fixtures; manifest: {manifest}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    manifest = Path(args.manifest)
    if not manifest.is_file():
        print(f"error: manifest not found: {manifest}", file=sys.stderr)
        return 2
    try:
        report = run_eval(manifest, cfg)
    except (PadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report_to_json(report), encoding="utf-8")
    print(report_to_table(report), end="")
    print(f"report written to {report_path}")
    return 1 if report.failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pad",
        description="Training-free adversarial patch localization and removal.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_defend = sub.add_parser("defend", help="localize and remove patches from images")
    p_defend.add_argument("inputs", nargs="+", help="input image paths")
    p_defend.add_argument("--out-dir", default=".", help="output directory")
    _add_pipeline_flags(p_defend)
    p_defend.set_defaults(func=cmd_defend)

    p_heat = sub.add_parser("heatmap", help="export per-stage heat maps")
    p_heat.add_argument("inputs", nargs="+", help="input image paths")
    p_heat.add_argument("--out-dir", default=".", help="output directory")
    _add_pipeline_flags(p_heat)
    p_heat.set_defaults(func=cmd_heatmap)

    p_synth = sub.add_parser("synth", help="synthesize patched fixtures with ground truth")
    p_synth.add_argument("--bases", nargs="*", default=[],
                         help="base image paths (omit to generate synthetic bases)")
    p_synth.add_argument("--synthetic-bases", type=int, default=8,
                         help="synthetic base count when --bases is omitted")
    p_synth.add_argument("--n", type=int, required=True, help="number of fixtures")
    p_synth.add_argument("--out-dir", required=True, help="output directory")
    _add_pipeline_flags(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="run the defense over a manifest and score it")
    p_eval.add_argument("--manifest", required=True, help="fixture manifest (JSON lines)")
    p_eval.add_argument("--report", default="report.json", help="report output path")
    _add_pipeline_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

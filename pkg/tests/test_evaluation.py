import json

import numpy as np
import pytest

from pad import (
    BinaryMask,
    RunConfig,
    make_fixture_set,
    patch_flag,
    pixel_metrics,
    recall_patch,
    run_eval,
    synthetic_photo,
)
from pad.evaluation import report_to_json, report_to_table


def mask_from(coords, size=(6, 6)):
    bits = np.zeros(size, dtype=bool)
    for y, x in coords:
        bits[y, x] = True
    return BinaryMask(bits)


class TestPatchFlag:
    def test_superset_defense(self):
        gt = mask_from([(1, 1), (1, 2)])
        defense = mask_from([(1, 1), (1, 2), (3, 3)])
        assert patch_flag(gt, defense) == 1

    def test_disjoint(self):
        assert patch_flag(mask_from([(0, 0)]), mask_from([(5, 5)])) == 0

    def test_exactly_half_is_inclusive(self):
        gt = mask_from([(1, 1), (1, 2)])
        defense = mask_from([(1, 1)])
        assert patch_flag(gt, defense) == 1

    def test_just_under_half(self):
        gt = mask_from([(0, 0), (0, 1), (0, 2)])
        defense = mask_from([(0, 0)])
        assert patch_flag(gt, defense) == 0

    def test_empty_gt_rejected(self):
        with pytest.raises(ValueError):
            patch_flag(mask_from([]), mask_from([(0, 0)]))


class TestRecallPatch:
    def test_all_found(self):
        assert recall_patch([1, 1, 1]) == 1.0

    def test_half_found(self):
        assert recall_patch([1, 0, 1, 0]) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            recall_patch([])


class TestPixelMetrics:
    def test_identical(self):
        m = mask_from([(0, 0), (2, 3)])
        assert pixel_metrics(m, m) == (1.0, 1.0, 1.0)

    def test_empty_defense_convention(self):
        gt = mask_from([(0, 0)])
        empty = mask_from([])
        assert pixel_metrics(gt, empty) == (1.0, 0.0, 0.0)

    def test_half_covered(self):
        gt = mask_from([(0, c) for c in range(4)] + [(1, c) for c in range(4)])
        defense = mask_from([(0, c) for c in range(4)])
        assert pixel_metrics(gt, defense) == (1.0, 0.5, 0.5)

    def test_both_empty(self):
        assert pixel_metrics(mask_from([]), mask_from([])) == (1.0, 1.0, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pixel_metrics(mask_from([]), mask_from([], size=(5, 6)))


@pytest.fixture(scope="module")
def small_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    bases = [synthetic_photo(320, 256, seed=30000 + i) for i in range(4)]
    _, manifest = make_fixture_set(bases, 4, seed=424, kinds=("noise",), out_dir=out)
    return manifest


class TestRunEval:
    def test_report_shape_and_determinism(self, small_manifest):
        cfg = RunConfig()
        report_a = run_eval(small_manifest, cfg)
        report_b = run_eval(small_manifest, cfg)
        assert len(report_a.records) == 4
        assert report_a.failures == 0
        assert 0.0 <= report_a.recall_patch <= 1.0
        assert report_to_json(report_a) == report_to_json(report_b)
        assert report_a.config["provider"] == "components"

    def test_recall_invariant_to_order(self, small_manifest, tmp_path):
        cfg = RunConfig()
        lines = small_manifest.read_text().strip().splitlines()
        shuffled = tmp_path / "manifest.jsonl"
        shuffled.write_text("\n".join(reversed(lines)) + "\n")
        # image/mask paths are relative to the manifest's directory
        for rec in map(json.loads, lines):
            (tmp_path / rec["image"]).write_bytes(
                (small_manifest.parent / rec["image"]).read_bytes()
            )
            for m in rec["masks"]:
                (tmp_path / m).write_bytes((small_manifest.parent / m).read_bytes())
        a = run_eval(small_manifest, cfg)
        b = run_eval(shuffled, cfg)
        assert a.recall_patch == b.recall_patch

    def test_parallel_jobs_match_serial(self, small_manifest):
        cfg = RunConfig()
        serial = run_eval(small_manifest, cfg)
        parallel = run_eval(small_manifest, cfg, jobs=4)
        assert report_to_json(serial) == report_to_json(parallel)

    def test_oracle_injection_gives_perfect_recall(self, small_manifest, tmp_path):
        # Serve the ground-truth masks through the directory provider; the
        # matched union then contains every patch, so recall must be 1.0.
        provider_dir = tmp_path / "regions"
        provider_dir.mkdir()
        for rec in map(json.loads, small_manifest.read_text().strip().splitlines()):
            stem = rec["image"][: -len(".png")]
            for i, m in enumerate(rec["masks"]):
                src = small_manifest.parent / m
                (provider_dir / f"{stem}.mask.{i}.png").write_bytes(src.read_bytes())
        cfg = RunConfig.from_mapping({"provider": f"dir:{provider_dir}"})
        report = run_eval(small_manifest, cfg)
        assert report.recall_patch == 1.0

    def test_missing_image_recorded_and_run_continues(self, small_manifest, tmp_path):
        lines = small_manifest.read_text().strip().splitlines()
        broken = json.loads(lines[0])
        broken["image"] = "missing.png"
        manifest = tmp_path / "manifest.jsonl"
        manifest.write_text("\n".join([json.dumps(broken)] + lines[1:]) + "\n")
        for rec in map(json.loads, lines[1:]):
            (tmp_path / rec["image"]).write_bytes(
                (small_manifest.parent / rec["image"]).read_bytes()
            )
            for m in rec["masks"]:
                (tmp_path / m).write_bytes((small_manifest.parent / m).read_bytes())
        report = run_eval(manifest, RunConfig())
        assert report.failures == 1
        failed = [r for r in report.records if r.error is not None]
        assert len(failed) == 1
        assert "missing.png" in failed[0].image_id

    def test_empty_manifest_rejected(self, tmp_path):
        empty = tmp_path / "manifest.jsonl"
        empty.write_text("")
        with pytest.raises(ValueError):
            run_eval(empty, RunConfig())

    def test_table_renders(self, small_manifest):
        report = run_eval(small_manifest, RunConfig())
        table = report_to_table(report)
        assert "recall_patch" in table
        assert "fixture_0000.png" in table

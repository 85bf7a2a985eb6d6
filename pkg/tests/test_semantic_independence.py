import math
from collections import Counter

import numpy as np
import pytest

from pad import (
    DegenerateGridError,
    EmptyWindowError,
    GrayBuffer,
    ImageBuffer,
    JointHistogram,
    MiConfig,
    joint_histogram,
    mi_heatmap,
    mutual_information,
    tile_grid,
)


def oracle_mi_from_windows(wa, wb, bins):
    """Mutual information by direct dictionary summation."""
    n = wa.size
    pairs = Counter()
    ca = Counter()
    cb = Counter()
    for va, vb in zip(wa.ravel().tolist(), wb.ravel().tolist()):
        ia = va * bins // 256
        ib = vb * bins // 256
        pairs[(ia, ib)] += 1
        ca[ia] += 1
        cb[ib] += 1
    mi = 0.0
    for (ia, ib), c in pairs.items():
        p = c / n
        mi += p * math.log2(p / ((ca[ia] / n) * (cb[ib] / n)))
    return mi


def oracle_entropy(values, bins):
    counts = Counter(v * bins // 256 for v in values.ravel().tolist())
    n = values.size
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def paired_gray(wa, wb):
    """GrayBuffer holding two equal windows side by side, plus their rects."""
    h, w = wa.shape
    g = GrayBuffer(np.hstack([wa, wb]))
    return g, (0, 0, w, h), (w, 0, w, h)


class TestMiConfig:
    def test_defaults(self):
        cfg = MiConfig()
        assert (cfg.window_side, cfg.bins, cfg.flat_entropy_floor) == (32, 32, 0.05)

    @pytest.mark.parametrize(
        "kwargs", [dict(window_side=1), dict(bins=1), dict(bins=257),
                   dict(flat_entropy_floor=-0.1)]
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            MiConfig(**kwargs)


class TestTileGrid:
    def test_exact_2x2(self):
        grid = tile_grid(64, 64, 32)
        assert len(grid.tiles) == 4
        assert all(t[2] == 32 and t[3] == 32 for t in grid.tiles)
        assert all(len(n) == 2 for n in grid.neighbors)

    def test_clipped_last_column(self):
        grid = tile_grid(70, 64, 32)
        assert (grid.rows, grid.cols) == (2, 3)
        right_column = [grid.tiles[i] for i in (2, 5)]
        assert all(t[0] == 64 and t[2] == 6 for t in right_column)

    def test_single_tile_has_no_neighbors(self):
        grid = tile_grid(32, 32, 32)
        assert len(grid.tiles) == 1
        assert grid.neighbors == ((),)

    def test_interior_tile_has_four_neighbors(self):
        grid = tile_grid(96, 96, 32)
        assert len(grid.neighbors[4]) == 4
        corner_counts = [len(grid.neighbors[i]) for i in (0, 2, 6, 8)]
        assert corner_counts == [2, 2, 2, 2]
        edge_counts = [len(grid.neighbors[i]) for i in (1, 3, 5, 7)]
        assert edge_counts == [3, 3, 3, 3]

    def test_tiles_partition_image_exactly(self, rng):
        for _ in range(10):
            w = int(rng.integers(32, 200))
            h = int(rng.integers(32, 200))
            grid = tile_grid(w, h, 32)
            painted = np.zeros((h, w), dtype=int)
            for x, y, tw, th in grid.tiles:
                painted[y : y + th, x : x + tw] += 1
            assert np.all(painted == 1)

    def test_window_too_large_rejected(self):
        with pytest.raises(ValueError):
            tile_grid(31, 64, 32)
        with pytest.raises(ValueError):
            tile_grid(64, 64, 1)


class TestJointHistogram:
    def test_same_flat_window_concentrates_at_origin(self):
        g = GrayBuffer(np.zeros((4, 4), dtype=np.uint8))
        jh = joint_histogram(g, (0, 0, 4, 4), (0, 0, 4, 4), 2)
        assert jh.total == 16
        assert jh.counts[0, 0] == 16
        assert jh.counts.sum() == 16

    def test_black_vs_white_mass_at_0_1(self):
        g = GrayBuffer(np.hstack([np.zeros((4, 4), np.uint8), np.full((4, 4), 255, np.uint8)]))
        jh = joint_histogram(g, (0, 0, 4, 4), (4, 0, 4, 4), 2)
        assert jh.counts[0, 1] == 16
        assert jh.counts.sum() == 16

    def test_hand_pairing_2x2(self):
        wa = np.array([[0, 0], [255, 255]], dtype=np.uint8)
        wb = np.array([[0, 255], [0, 255]], dtype=np.uint8)
        g, a, b = paired_gray(wa, wb)
        jh = joint_histogram(g, a, b, 2)
        assert jh.counts.tolist() == [[1, 1], [1, 1]]

    def test_windows_cropped_to_common_overlap(self):
        g = GrayBuffer(np.arange(48, dtype=np.uint8).reshape(6, 8))
        jh = joint_histogram(g, (0, 0, 5, 6), (5, 0, 3, 4), 4)
        assert jh.total == 3 * 4

    def test_empty_overlap_rejected(self):
        g = GrayBuffer(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(EmptyWindowError):
            joint_histogram(g, (0, 0, 0, 4), (0, 0, 4, 4), 2)

    def test_out_of_bounds_rejected(self):
        g = GrayBuffer(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            joint_histogram(g, (2, 2, 4, 4), (0, 0, 4, 4), 2)

    def test_counts_must_sum_to_total(self):
        with pytest.raises(ValueError):
            JointHistogram(2, np.array([[1, 0], [0, 0]]), 2)


class TestMutualInformation:
    def test_identical_two_symbol_windows_give_one_bit(self):
        jh = JointHistogram(2, np.array([[1, 0], [0, 1]]), 2)
        assert mutual_information(jh) == pytest.approx(1.0, abs=1e-12)

    def test_independent_uniform_table_gives_zero(self):
        jh = JointHistogram(2, np.ones((2, 2), dtype=int), 4)
        assert mutual_information(jh) == 0.0

    def test_hand_table_from_direct_summation(self):
        # [[0.4, 0.1], [0.1, 0.4]] as counts over 10 samples
        jh = JointHistogram(2, np.array([[4, 1], [1, 4]]), 10)
        expected = (
            2 * 0.4 * math.log2(0.4 / 0.25) + 2 * 0.1 * math.log2(0.1 / 0.25)
        )
        assert expected == pytest.approx(0.278, abs=5e-4)
        assert mutual_information(jh) == pytest.approx(expected, abs=1e-12)

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(30):
            bins = int(rng.choice([2, 8, 32]))
            wa = rng.integers(0, 256, (8, 8), dtype=np.uint8)
            wb = rng.integers(0, 256, (8, 8), dtype=np.uint8)
            g, a, b = paired_gray(wa, wb)
            got = mutual_information(joint_histogram(g, a, b, bins))
            want = oracle_mi_from_windows(wa, wb, bins)
            assert abs(got - want) <= 1e-12

    def test_nonnegative_and_symmetric(self, rng):
        for _ in range(50):
            bins = 8
            counts = rng.integers(0, 5, (bins, bins))
            if counts.sum() == 0:
                counts[0, 0] = 1
            jh = JointHistogram(bins, counts, int(counts.sum()))
            jt = JointHistogram(bins, counts.T.copy(), int(counts.sum()))
            mi = mutual_information(jh)
            assert mi >= 0.0
            assert abs(mi - mutual_information(jt)) <= 1e-12

    def test_self_information_equals_entropy(self, rng):
        for _ in range(30):
            w = rng.integers(0, 256, (8, 8), dtype=np.uint8)
            g, a, b = paired_gray(w, w)
            mi = mutual_information(joint_histogram(g, a, b, 32))
            assert abs(mi - oracle_entropy(w, 32)) <= 1e-12


class TestMiHeatmap:
    def test_heat_is_piecewise_constant_on_tiles(self, rng):
        img = ImageBuffer(rng.integers(0, 256, (64, 96, 3), dtype=np.uint8))
        heat = mi_heatmap(img).values
        grid = tile_grid(96, 64, 32)
        for x, y, w, h in grid.tiles:
            block = heat[y : y + h, x : x + w]
            assert np.all(block == block[0, 0])

    def test_iid_noise_tiles_score_low(self):
        # Independent neighbors should score near zero. The joint-histogram
        # estimator is biased upward by sparse sampling (1024 pixels over
        # 32x32 bins), so the honest ceiling is ~0.6 bits, not 0.
        worst = 0.0
        for s in range(20):
            rng = np.random.default_rng(123000 + s)
            img = ImageBuffer(rng.integers(0, 256, (480, 640, 3), dtype=np.uint8))
            worst = max(worst, float(mi_heatmap(img).values.max()))
        assert worst < 0.7

    def test_periodic_texture_scores_its_own_entropy(self, rng):
        tile = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        mosaic = np.tile(tile, (3, 4))
        img = ImageBuffer(np.repeat(mosaic[:, :, None], 3, axis=2))
        heat = mi_heatmap(img).values
        expected = oracle_entropy(tile, 32)
        assert np.allclose(heat, expected, atol=1e-12)

    def test_flat_tiles_receive_peak_heat(self, rng):
        # Three tiles: flat | texture | same texture. The textured pair
        # shares content (high MI); the flat tile would score zero but the
        # guard reassigns it the image peak.
        tile = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        strip = np.hstack([np.full((32, 32), 200, np.uint8), tile, tile])
        img = ImageBuffer(np.repeat(strip[:, :, None], 3, axis=2))
        heat = mi_heatmap(img).values
        flat_value = heat[0, 0]
        right_value = heat[0, 95]
        middle_value = heat[0, 40]
        peak = heat.max()
        assert flat_value == peak
        assert right_value == peak  # lone textured neighbor is its twin
        assert middle_value < peak  # averaged with the flat neighbor

    def test_single_tile_image_rejected(self):
        img = ImageBuffer(np.zeros((32, 32, 3), dtype=np.uint8))
        with pytest.raises(DegenerateGridError):
            mi_heatmap(img)

    def test_image_smaller_than_window_rejected(self):
        img = ImageBuffer(np.zeros((16, 64, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            mi_heatmap(img)

"""Quantizer: bin semantics, mismatch counting, DP vs exhaustive search."""

import numpy as np
import pytest

from platoonkey.channel import ChannelParams, PlatoonGeometry, generate_trace
from platoonkey.quantizer import (
    InfeasiblePartition,
    IntervalSet,
    OutOfRange,
    bin_index,
    bin_indices,
    mismatch_count,
    optimize_boundaries,
    optimize_intervals,
    quantize_bit,
    quantize_trace,
)

from _oracles import brute_force_boundaries, chained_mismatch

TWO_BIN = IntervalSet(boundaries=(0.0, 5.0, 10.0))


class TestQuantizeBit:
    def test_lower_bound_inclusive(self):
        assert quantize_bit(0.0, 1, TWO_BIN) == 1
        assert quantize_bit(5.0, 2, TWO_BIN) == 1

    def test_upper_bound_exclusive(self):
        assert quantize_bit(5.0, 1, TWO_BIN) == 0
        assert quantize_bit(10.0, 2, TWO_BIN) == 0

    def test_below_floor_zero_everywhere(self):
        assert quantize_bit(-0.1, 1, TWO_BIN) == 0
        assert quantize_bit(-0.1, 2, TWO_BIN) == 0


class TestBinIndex:
    def test_examples(self):
        assert bin_index(3.0, TWO_BIN) == 1
        assert bin_index(5.0, TWO_BIN) == 2

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            bin_index(10.0, TWO_BIN)
        with pytest.raises(OutOfRange):
            bin_index(-0.5, TWO_BIN)

    def test_matches_quantize_bit(self):
        rng = np.random.default_rng(2)
        iset = IntervalSet(boundaries=(0.0, 1.5, 4.0, 9.0))
        for x in rng.uniform(0.0, 8.99, 100):
            l = bin_index(float(x), iset)
            assert quantize_bit(float(x), l, iset) == 1
            for other in range(1, 4):
                if other != l:
                    assert quantize_bit(float(x), other, iset) == 0

    def test_vectorized_clamp(self):
        xs = np.array([-1.0, 3.0, 12.0, np.nan])
        bins, ok = bin_indices(xs, TWO_BIN, clamp=True)
        assert bins.tolist() == [1, 1, 2, 1]
        assert ok.tolist() == [False, True, False, False]

    def test_interval_set_validation(self):
        with pytest.raises(ValueError):
            IntervalSet(boundaries=(0.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            IntervalSet(boundaries=(0.0, 2.0))


class TestMismatchCount:
    def test_identical_sequences_zero(self):
        seq = [1, 2, 2, 1, 2]
        for l in (1, 2):
            assert mismatch_count([seq, seq, seq], l) == 0

    def test_single_disagreement(self):
        assert mismatch_count([[1], [2]], 1) == 1
        assert mismatch_count([[1], [2]], 2) == 1

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            mismatch_count([[1, 2], [1]], 1)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            rows = rng.integers(1, 5, size=(5, 50))
            l = int(rng.integers(1, 5))
            assert mismatch_count(list(rows), l) == chained_mismatch(rows.tolist(), l)


def random_instance(rng):
    n_rows = int(rng.integers(2, 5))
    slots = int(rng.integers(1, 13))
    L = int(rng.integers(2, 5))
    G = int(rng.integers(L, 15))
    base = rng.normal(0.0, 2.0, slots)
    rows = np.vstack([base + rng.normal(0, rng.uniform(0.1, 2.0), slots)
                      for _ in range(n_rows)])
    floor = float(rows.min()) - float(rng.uniform(0.1, 2.0))
    return rows, floor, L, G


class TestOptimizeBoundaries:
    def test_identical_rows_zero_mismatch(self):
        rng = np.random.default_rng(1)
        row = rng.normal(0, 3, 40)
        rows = np.vstack([row, row, row])
        for L in (2, 3, 4):
            iset, table = optimize_boundaries(rows, float(row.min()) - 1.0, L, 16)
            assert table.total == 0
            assert iset.n_intervals == L

    def test_small_instance_matches_brute_force(self):
        rng = np.random.default_rng(10)
        rows = np.vstack([rng.normal(0, 2, 6) for _ in range(3)])
        floor = float(rows.min()) - 0.5
        iset, table = optimize_boundaries(rows, floor, 2, 8)
        bounds, mismatch, _ = brute_force_boundaries(rows, floor, 2, 8)
        assert table.total == mismatch
        assert iset.boundaries == pytest.approx(bounds, rel=1e-12)

    def test_three_intervals_matches_brute_force(self):
        rng = np.random.default_rng(11)
        rows = np.vstack([rng.normal(0, 2, 10) for _ in range(4)])
        floor = float(rows.min()) - 0.3
        iset, table = optimize_boundaries(rows, floor, 3, 12)
        bounds, mismatch, _ = brute_force_boundaries(rows, floor, 3, 12)
        assert table.total == mismatch
        assert iset.boundaries == pytest.approx(bounds, rel=1e-12)

    def test_random_instances_match_brute_force(self):
        rng = np.random.default_rng(99)
        for _ in range(60):
            rows, floor, L, G = random_instance(rng)
            iset, table = optimize_boundaries(rows, floor, L, G)
            bounds, mismatch, balance = brute_force_boundaries(rows, floor, L, G)
            assert table.total == mismatch
            assert iset.boundaries == pytest.approx(bounds, rel=1e-12)

    def test_bellman_table_consistency(self):
        rng = np.random.default_rng(4)
        rows = np.vstack([rng.normal(0, 2, 30) for _ in range(4)])
        iset, table = optimize_boundaries(rows, float(rows.min()) - 1.0, 4, 20)
        per, best = table.per_interval, table.cumulative_best
        assert best[0] == per[0]
        for l in range(1, len(per)):
            assert best[l] == min(best[l - 1], per[l])

    def test_shift_covariance(self):
        rng = np.random.default_rng(5)
        rows = np.vstack([rng.normal(0, 2, 25) for _ in range(3)])
        floor = float(rows.min()) - 1.0
        c = 12.5
        a_set, a_tab = optimize_boundaries(rows, floor, 3, 16)
        b_set, b_tab = optimize_boundaries(rows + c, floor + c, 3, 16)
        assert a_tab.per_interval == b_tab.per_interval
        np.testing.assert_allclose(np.asarray(b_set.boundaries),
                                   np.asarray(a_set.boundaries) + c, rtol=1e-9)

    def test_partition_invariants(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            rows, floor, L, G = random_instance(rng)
            iset, _ = optimize_boundaries(rows, floor, L, G)
            b = np.asarray(iset.boundaries)
            assert len(b) == L + 1
            assert np.all(np.diff(b) > 0)
            assert b[0] == floor
            assert b[-1] > rows.max()

    def test_infeasible_grid(self):
        rows = np.ones((2, 4))
        with pytest.raises(InfeasiblePartition):
            optimize_boundaries(rows, 0.0, 4, 3)

    def test_balance_prefers_occupied_bins(self):
        # noisy data: minimizing mismatch alone would empty every bin by
        # cramming all samples into one; the balance stage must prevent that
        rng = np.random.default_rng(12)
        rows = np.vstack([rng.normal(0, 2, 60),
                          rng.normal(0, 2, 60) + rng.normal(0, 0.3, 60)])
        iset, _ = optimize_boundaries(rows, float(rows.min()) - 5.0, 4, 32)
        bins, _ = bin_indices(rows[0], iset)
        counts = np.bincount(bins, minlength=5)[1:]
        assert counts.min() >= 60 // (2 * 4)


class TestOptimizeIntervals:
    def trace(self, seed=21, sigma=3.0, n=4, slots=60):
        p = ChannelParams(shadowing_sigma_db=sigma,
                          shadowing_common_fraction=0.95,
                          measurement_noise_db=0.1,
                          rss_decode_floor_db=-25.0)
        g = PlatoonGeometry(n_vehicles=n, pair_distance_m=2.0)
        return p, generate_trace(p, g, slots, seed)

    def test_uses_decode_floor(self):
        p, t = self.trace()
        iset, _ = optimize_intervals(t, 2, 16, floor=p.rss_decode_floor_db)
        assert iset.decode_floor == p.rss_decode_floor_db

    def test_drops_invalid_slots_synchronously(self):
        p, t = self.trace(sigma=5.0, slots=200)
        iset, _ = optimize_intervals(t, 2, 16, floor=p.rss_decode_floor_db)
        qt = quantize_trace(t, iset)
        dropped = set(range(t.slots)) - set(qt.slot_indices.tolist())
        for s in dropped:
            below = (t.values[:, s] < p.rss_decode_floor_db) & t.valid[:, s]
            assert (~t.valid[:, s]).any() or below.any() or \
                (t.values[:, s] >= iset.boundaries[-1]).any()
        assert qt.bins.shape == (4, len(qt.slot_indices))
        assert qt.bins.min() >= 1 and qt.bins.max() <= 2

    def test_eavesdropper_bins_clamped(self):
        p, t = self.trace(sigma=4.0, slots=100)
        iset, _ = optimize_intervals(t, 3, 16, floor=p.rss_decode_floor_db)
        qt = quantize_trace(t, iset)
        assert qt.eavesdropper_bins.min() >= 1
        assert qt.eavesdropper_bins.max() <= 3
        assert len(qt.eavesdropper_bins) == qt.n_retained

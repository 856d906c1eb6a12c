"""Adaptive RSS quantization via dynamic-programming interval fitting.

A quantizer is an ordered set of L contiguous half-open dB intervals
``[b_0, b_1), [b_1, b_2), ..., [b_{L-1}, b_L)`` with ``b_0`` pinned to the
a-priori decode floor.  Candidate boundaries live on a uniform grid:
``b_0 = grid[0] = floor``, interior boundaries are chosen from the G - 1
grid points above the floor, and the top boundary is one grid step above
the largest retained sample, so every retained sample falls in some bin.

The fit minimizes the chained cross-vehicle mismatch count (adjacent
rows of the comparison chain XOR-ed per interval, summed over slots and
intervals) subject to a balance requirement: among all grid partitions
it first maximizes the minimum number of reference (vehicle-1) samples
per bin, then minimizes total mismatch, then takes the lexicographically
smallest boundary tuple.  Without the balance stage the mismatch
objective is degenerate: packing all interior boundaries below the
samples puts every sample in one bin and scores zero mismatch while
producing constant, entropy-free keys.

Both DP passes run over suffix subproblems in O(L * G^2) using prefix
sums, and boundaries are recovered front-to-back, each chosen as the
smallest grid point consistent with the optimum of the remaining tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import RssTrace

__all__ = [
    "InfeasiblePartition",
    "IntervalSet",
    "MismatchTable",
    "OutOfRange",
    "QuantizedTrace",
    "QuantizerConfig",
    "bin_index",
    "bin_indices",
    "mismatch_count",
    "optimize_boundaries",
    "optimize_intervals",
    "quantize_bit",
    "quantize_trace",
    "retained_slots",
]

_INF = np.iinfo(np.int64).max // 2


class OutOfRange(ValueError):
    """Sample falls outside the quantizer's span and is excluded."""


class InfeasiblePartition(ValueError):
    """No valid interval partition exists for the requested (L, G)."""


@dataclass(frozen=True)
class QuantizerConfig:
    n_intervals: int = 2
    grid_size: int = 64

    def __post_init__(self) -> None:
        if self.n_intervals < 2:
            raise ValueError("n_intervals must be >= 2")
        if self.grid_size < self.n_intervals:
            raise ValueError("grid_size must be >= n_intervals")


@dataclass(frozen=True)
class IntervalSet:
    """L contiguous half-open quantization intervals.

    ``boundaries`` has L + 1 strictly increasing entries; interval l
    (1-based) spans ``[boundaries[l-1], boundaries[l])`` and the first
    entry equals the configured decode floor.
    """

    boundaries: tuple[float, ...]

    def __post_init__(self) -> None:
        b = self.boundaries
        if len(b) < 3:
            raise ValueError("need at least 2 intervals (3 boundaries)")
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return len(self.boundaries) - 1

    @property
    def decode_floor(self) -> float:
        return self.boundaries[0]

    def lower(self, l: int) -> float:
        return self.boundaries[l - 1]

    def upper(self, l: int) -> float:
        return self.boundaries[l]


@dataclass(frozen=True)
class MismatchTable:
    """Chained mismatch counts per interval and their running minimum."""

    per_interval: tuple[int, ...]
    cumulative_best: tuple[int, ...]

    @property
    def total(self) -> int:
        return int(sum(self.per_interval))


def quantize_bit(x: float, l: int, intervals: IntervalSet) -> int:
    """Indicator bit of interval l: 1 iff ``lower(l) <= x < upper(l)``."""
    return int(intervals.lower(l) <= x < intervals.upper(l))


def bin_index(x: float, intervals: IntervalSet) -> int:
    """1-based index of the interval containing x.

    Raises :class:`OutOfRange` below the floor or at/above the top
    boundary; such samples are excluded from key extraction.
    """
    b = intervals.boundaries
    if not b[0] <= x < b[-1]:
        raise OutOfRange(f"sample {x!r} outside [{b[0]!r}, {b[-1]!r})")
    return int(np.searchsorted(b, x, side="right"))


def bin_indices(xs, intervals: IntervalSet, clamp: bool = False):
    """Vectorized bin lookup.

    Returns ``(bins, in_range)``; out-of-range entries are 0 when
    ``clamp`` is False, otherwise clamped to the nearest bin (1 or L).
    NaN entries are never in range; when clamping they map to bin 1.
    """
    b = np.asarray(intervals.boundaries)
    xs = np.asarray(xs, dtype=float)
    idx = np.searchsorted(b, xs, side="right")
    in_range = (idx >= 1) & (idx <= intervals.n_intervals) & np.isfinite(xs)
    if clamp:
        idx = np.clip(idx, 1, intervals.n_intervals)
        idx = np.where(np.isfinite(xs), idx, 1)
    else:
        idx = np.where(in_range, idx, 0)
    return idx.astype(np.int64), in_range


def mismatch_count(bin_sequences, l: int) -> int:
    """Chained mismatch count at interval l.

    ``bin_sequences`` are equal-length 1-based bin index sequences for the
    comparison chain (leader pair first, then each estimating vehicle in
    order); adjacent sequences are XOR-compared on their interval-l
    indicator bits and disagreements are summed over all slots.
    """
    seqs = [np.asarray(s) for s in bin_sequences]
    if len(seqs) < 2:
        raise ValueError("need at least two sequences to compare")
    length = len(seqs[0])
    if any(len(s) != length for s in seqs):
        raise ValueError("bin sequences must have equal length")
    total = 0
    for a, b in zip(seqs[:-1], seqs[1:]):
        total += int(np.sum((a == l) != (b == l)))
    return total


def _candidates(floor: float, top_sample: float, grid_size: int) -> np.ndarray:
    """Boundary candidates: G grid points from floor to the max sample,
    plus a top point one grid step above the max."""
    if not top_sample > floor:
        raise InfeasiblePartition(
            "decode floor must lie strictly below the largest retained sample")
    grid = np.linspace(floor, top_sample, grid_size)
    step = (top_sample - floor) / (grid_size - 1)
    return np.append(grid, top_sample + step)


class _SegmentTables:
    """O(1) mismatch cost and reference occupancy of candidate segments.

    For every adjacent chain pair and slot, the two candidate ranks are
    histogrammed as (lo, hi); the chained mismatch of segment [a, b) is
    the number of pairs with exactly one rank inside, read off the 2D
    prefix sums.
    """

    def __init__(self, samples: np.ndarray, cand: np.ndarray):
        m = len(cand)
        ranks = (np.searchsorted(cand, samples, side="right") - 1).astype(np.int64)
        lo = np.minimum(ranks[:-1], ranks[1:]).ravel()
        hi = np.maximum(ranks[:-1], ranks[1:]).ravel()
        hist = np.zeros((m, m), dtype=np.int64)
        np.add.at(hist, (lo, hi), 1)
        # prefix[a, b] = number of pairs with lo < a and hi < b
        self.prefix = np.zeros((m + 1, m + 1), dtype=np.int64)
        self.prefix[1:, 1:] = hist.cumsum(0).cumsum(1)
        self.m = m
        ref_counts = np.bincount(ranks[0], minlength=m)
        self.ref_prefix = np.concatenate(([0], np.cumsum(ref_counts)))

    def cost(self, a: int, b) -> np.ndarray:
        """Mismatch of segment(s) [a, b): pairs with exactly one rank inside."""
        p, m = self.prefix, self.m
        b = np.asarray(b)
        lo_in_hi_out = (p[b, m] - p[a, m]) - (p[b, b] - p[a, b])
        hi_in_lo_out = p[a, b] - p[a, a]
        return lo_in_hi_out + hi_in_lo_out

    def occupancy(self, a: int, b) -> np.ndarray:
        """Reference samples with rank in [a, b)."""
        return self.ref_prefix[np.asarray(b)] - self.ref_prefix[a]


def optimize_boundaries(samples, floor: float, n_intervals: int,
                        grid_size: int = 64) -> tuple[IntervalSet, MismatchTable]:
    """Fit interval boundaries to a (chain_members, slots) sample matrix.

    Row 0 is the reference (leader) sequence used for the balance stage;
    rows are compared pairwise in order for the mismatch objective.  All
    samples must be finite and at or above the floor.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("samples must be a (chain_members >= 2, slots) matrix")
    if samples.shape[1] < 1:
        raise InfeasiblePartition("need at least one retained slot")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    if np.any(samples < floor):
        raise ValueError("samples below the decode floor must be dropped first")
    L = int(n_intervals)
    G = int(grid_size)
    if L < 2:
        raise ValueError("n_intervals must be >= 2")
    if G < L:
        raise InfeasiblePartition(f"grid_size {G} < n_intervals {L}")

    cand = _candidates(floor, float(samples.max()), G)
    top = G  # index of the appended top candidate
    tables = _SegmentTables(samples, cand)

    # Interval l (1-based) starts at boundary index a and ends at b; interior
    # boundary l sits at grid index in [l, G - L + l], the floor at 0, the
    # top at index G.
    def b_range(l: int, a: int) -> np.ndarray:
        return np.arange(a + 1, G - (L - l) + 1)

    def a_range(l: int) -> range:
        if l == 1:
            return range(0, 1)
        return range(l - 1, G - (L - l) if l < L else G)

    # Pass 1: maximize the minimum per-bin reference occupancy.
    balance = np.full(G + 1, -1, dtype=np.int64)
    for a in a_range(L):
        balance[a] = tables.occupancy(a, top)
    for l in range(L - 1, 0, -1):
        nxt = balance
        balance = np.full(G + 1, -1, dtype=np.int64)
        for a in a_range(l):
            bs = b_range(l, a)
            vals = np.minimum(tables.occupancy(a, bs), nxt[bs])
            if len(vals):
                balance[a] = vals.max()
    target = int(balance[0])
    if target < 0:
        raise InfeasiblePartition("no feasible boundary placement")

    # Pass 2: minimize total mismatch among partitions whose every bin
    # holds at least `target` reference samples.  tails[l-1][a] = best
    # cost of intervals l..L when interval l starts at index a.
    tail = np.full(G + 1, _INF, dtype=np.int64)
    for a in a_range(L):
        if tables.occupancy(a, top) >= target:
            tail[a] = tables.cost(a, top)
    tails = [tail]
    for l in range(L - 1, 0, -1):
        nxt = tails[-1]
        tail = np.full(G + 1, _INF, dtype=np.int64)
        for a in a_range(l):
            bs = b_range(l, a)
            feas = (tables.occupancy(a, bs) >= target) & (nxt[bs] < _INF)
            if not feas.any():
                continue
            seg = np.where(feas, tables.cost(a, bs) + nxt[bs], _INF)
            tail[a] = seg.min()
        tails.append(tail)
    tails.reverse()
    total_cost = int(tails[0][0])
    if total_cost >= _INF:
        raise InfeasiblePartition("no feasible boundary placement")

    # Forward reconstruction; the smallest boundary consistent with the
    # tail optimum at each step yields the lexicographically smallest tuple.
    idxs = [0]
    a, remaining = 0, total_cost
    for l in range(1, L):
        bs = b_range(l, a)
        seg = tables.cost(a, bs)
        good = ((tables.occupancy(a, bs) >= target)
                & (seg + tails[l][bs] == remaining))
        if not good.any():
            raise AssertionError("reconstruction lost the DP optimum")
        b = int(bs[np.argmax(good)])
        idxs.append(b)
        remaining -= int(tables.cost(a, b))
        a = b
    idxs.append(top)

    iset = IntervalSet(boundaries=tuple(float(cand[i]) for i in idxs))
    bins = [bin_indices(row, iset)[0] for row in samples]
    per_interval = tuple(mismatch_count(bins, l) for l in range(1, L + 1))
    running: list[int] = []
    for r in per_interval:
        running.append(r if not running else min(running[-1], r))
    return iset, MismatchTable(per_interval=per_interval,
                               cumulative_best=tuple(running))


def retained_slots(trace: RssTrace, floor: float) -> np.ndarray:
    """Slots valid at every vehicle and at/above the decode floor.

    Dropped slot indices carry no RSS information, so sharing them across
    vehicles (and with the eavesdropper) is assumed safe.
    """
    ok = trace.valid.all(axis=0)
    vmin = np.where(trace.valid, trace.values, np.inf).min(axis=0)
    return np.flatnonzero(ok & (vmin >= floor))


def _chain_rows(n_vehicles: int) -> list[int]:
    # leader-pair measurement once, then each estimating vehicle
    return [0] + list(range(2, n_vehicles))


def optimize_intervals(trace: RssTrace, n_intervals: int, grid_size: int = 64,
                       floor: float | None = None
                       ) -> tuple[IntervalSet, MismatchTable]:
    """Fit the quantizer to one trace's comparison chain.

    The chain pairs the leader-pair measurement with vehicle 3's estimate
    and each further adjacent estimator pair.  Slots invalid at any
    vehicle or below the decode floor are dropped synchronously first.
    ``floor`` defaults to one nominal grid step below the smallest
    retained sample when not supplied.
    """
    if floor is None:
        keep = retained_slots(trace, -np.inf)
        if len(keep) == 0:
            raise InfeasiblePartition("trace has no valid slots")
        vals = trace.values[:, keep]
        span = float(vals.max() - vals.min()) or 1.0
        floor = float(vals.min()) - span / max(grid_size - 1, 1)
    keep = retained_slots(trace, floor)
    if len(keep) == 0:
        raise InfeasiblePartition("no retained slots above the decode floor")
    chain = trace.values[np.ix_(_chain_rows(trace.n_vehicles), keep)]
    return optimize_boundaries(chain, floor, n_intervals, grid_size)


@dataclass
class QuantizedTrace:
    """Synchronously retained slots and their per-vehicle bin indices."""

    slot_indices: np.ndarray          # (retained,) original slot positions
    bins: np.ndarray                  # (n_vehicles, retained) 1-based
    eavesdropper_bins: np.ndarray     # (retained,) clamped best effort

    @property
    def n_retained(self) -> int:
        return len(self.slot_indices)


def quantize_trace(trace: RssTrace, intervals: IntervalSet) -> QuantizedTrace:
    """Quantize every vehicle's retained samples into bin indices.

    The eavesdropper follows the shared drop indices and clamps its own
    invalid or out-of-range observations to the nearest bin, which is the
    best it can do while emitting a key of the agreed length.
    """
    keep = retained_slots(trace, intervals.decode_floor)
    # top-side out-of-range can occur when quantizing a fresh trace with
    # previously fitted boundaries; those slots are dropped synchronously too
    if len(keep):
        in_top = (trace.values[:, keep] < intervals.boundaries[-1]).all(axis=0)
        keep = keep[in_top]
    bins = np.empty((trace.n_vehicles, len(keep)), dtype=np.int64)
    for i in range(trace.n_vehicles):
        bins[i], _ = bin_indices(trace.values[i, keep], intervals)
    ebins, _ = bin_indices(trace.eavesdropper[keep], intervals, clamp=True)
    return QuantizedTrace(slot_indices=keep, bins=bins, eavesdropper_bins=ebins)

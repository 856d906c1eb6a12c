"""Independent reference implementations used to pin expected values.

Everything here is deliberately straight-line: nested loops, itertools
enumeration, and high-precision special functions via mpmath.  None of
it shares code paths with the package.
"""

from __future__ import annotations

import itertools
import math

import mpmath

mpmath.mp.dps = 50


def brute_force_boundaries(samples, floor, n_intervals, grid_size):
    """Exhaustive search over every grid partition.

    Mirrors the package's selection rule with plain loops: maximize the
    minimum per-bin count of the reference row, then minimize the chained
    mismatch, then take the lexicographically smallest boundary tuple.
    Returns (boundaries, total_mismatch, best_balance).
    """
    rows = [list(r) for r in samples]
    top_sample = max(max(r) for r in rows)
    if not top_sample > floor:
        raise ValueError("floor must sit below the largest sample")
    step = (top_sample - floor) / (grid_size - 1)
    grid = [floor + k * step for k in range(grid_size)]
    grid[-1] = top_sample
    candidates = grid + [top_sample + step]

    def bin_of(x, bounds):
        for l in range(len(bounds) - 1):
            if bounds[l] <= x < bounds[l + 1]:
                return l + 1
        return 0

    def total_mismatch(bounds):
        total = 0
        for l in range(1, n_intervals + 1):
            for a, b in zip(rows[:-1], rows[1:]):
                for x, y in zip(a, b):
                    bit_x = 1 if bin_of(x, bounds) == l else 0
                    bit_y = 1 if bin_of(y, bounds) == l else 0
                    if bit_x != bit_y:
                        total += 1
        return total

    def min_occupancy(bounds):
        worst = None
        for l in range(1, n_intervals + 1):
            count = sum(1 for x in rows[0] if bin_of(x, bounds) == l)
            worst = count if worst is None else min(worst, count)
        return worst

    best = None
    interior_choices = range(1, grid_size)  # grid points above the floor
    for combo in itertools.combinations(interior_choices, n_intervals - 1):
        bounds = ([candidates[0]]
                  + [candidates[i] for i in combo]
                  + [candidates[-1]])
        key = (-min_occupancy(bounds), total_mismatch(bounds), bounds)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("no feasible partition")
    neg_occ, mismatch, bounds = best
    return tuple(bounds), mismatch, -neg_occ


def chained_mismatch(bin_rows, l):
    """Plain re-count of the interval-l mismatch chain."""
    total = 0
    for a, b in zip(bin_rows[:-1], bin_rows[1:]):
        for x, y in zip(a, b):
            if (1 if x == l else 0) != (1 if y == l else 0):
                total += 1
    return total


def gray_list(q):
    """Reflected-binary list built by the mirror construction."""
    words = [[0], [1]]
    for _ in range(q - 1):
        words = [[0] + w for w in words] + [[1] + w for w in reversed(words)]
    return ["".join(str(b) for b in w) for w in words]


def erfc_hp(x):
    return float(mpmath.erfc(x))


def gammaincc_hp(a, x):
    """Regularized upper incomplete gamma Q(a, x) at 50 digits."""
    return float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))


def normal_cdf_hp(x):
    return float(mpmath.ncdf(x))


def frequency_p(bits):
    n = len(bits)
    s = abs(sum(2 * b - 1 for b in bits))
    return erfc_hp(s / math.sqrt(2 * n))


def block_frequency_p(bits, m):
    n = len(bits)
    k = n // m
    chi2 = 0.0
    for i in range(k):
        pi = sum(bits[i * m:(i + 1) * m]) / m
        chi2 += (pi - 0.5) ** 2
    chi2 *= 4.0 * m
    return gammaincc_hp(k / 2.0, chi2 / 2.0)


def cusum_p(bits, reverse=False):
    seq = list(reversed(bits)) if reverse else list(bits)
    walk, z, s = 0, 0, []
    for b in seq:
        walk += 2 * b - 1
        z = max(z, abs(walk))
    if z == 0:
        return 1.0
    n = len(seq)
    sq = math.sqrt(n)
    t1 = sum(normal_cdf_hp((4 * k + 1) * z / sq) - normal_cdf_hp((4 * k - 1) * z / sq)
             for k in range((-n // z + 1) // 4, (n // z - 1) // 4 + 1))
    t2 = sum(normal_cdf_hp((4 * k + 3) * z / sq) - normal_cdf_hp((4 * k + 1) * z / sq)
             for k in range((-n // z - 3) // 4, (n // z - 1) // 4 + 1))
    return min(max(1.0 - t1 + t2, 0.0), 1.0)


def runs_p(bits):
    n = len(bits)
    pi = sum(bits) / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v = 1 + sum(1 for a, b in zip(bits[:-1], bits[1:]) if a != b)
    return erfc_hp(abs(v - 2 * n * pi * (1 - pi))
                   / (2 * math.sqrt(2 * n) * pi * (1 - pi)))


def serial_psisq(bits, m):
    if m <= 0:
        return 0.0
    n = len(bits)
    ext = list(bits) + list(bits[:m - 1])
    counts = {}
    for i in range(n):
        pat = tuple(ext[i:i + m])
        counts[pat] = counts.get(pat, 0) + 1
    return (2 ** m) / n * sum(c * c for c in counts.values()) - n


def serial_p(bits, m):
    d1 = serial_psisq(bits, m) - serial_psisq(bits, m - 1)
    d2 = (serial_psisq(bits, m) - 2 * serial_psisq(bits, m - 1)
          + serial_psisq(bits, m - 2))
    return (gammaincc_hp(2 ** (m - 2), d1 / 2.0),
            gammaincc_hp(2 ** (m - 3), d2 / 2.0))


def apen_p(bits, m):
    n = len(bits)

    def phi(mm):
        if mm == 0:
            return 0.0
        ext = list(bits) + list(bits[:mm - 1])
        counts = {}
        for i in range(n):
            pat = tuple(ext[i:i + mm])
            counts[pat] = counts.get(pat, 0) + 1
        return sum((c / n) * math.log(c / n) for c in counts.values())

    apen = phi(m) - phi(m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return gammaincc_hp(2 ** (m - 1), chi2 / 2.0)


def evcd_expected_attempts(p, cap):
    """Expected transmissions of a capped retry-until-delivered loop."""
    # sum_{k=0}^{cap} p^k, the truncated geometric series
    return sum(p ** k for k in range(cap + 1))

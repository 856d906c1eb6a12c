"""Statistical randomness battery for generated key streams.

Eight tests returning p-values: frequency, block frequency, cumulative
sums (forward and reverse), runs, longest run of ones, discrete Fourier
transform, approximate entropy, and serial (which yields two p-values).
A stream passes a test when every p-value exceeds 0.01.

Each test enforces a minimum input length; the defaults follow the
usual recommendations but can be lowered for desk-scale corpora via the
``floor`` argument.  The numerical core is the complementary error
function and the regularized upper incomplete gamma ratio; accuracy of
both is pinned against a high-precision reference in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, gammaincc
from scipy.stats import norm

__all__ = [
    "DEFAULT_FLOORS",
    "InsufficientData",
    "RandomnessReport",
    "TestResult",
    "approx_entropy_test",
    "block_frequency_test",
    "cusum_test",
    "dft_test",
    "frequency_test",
    "longest_run_test",
    "run_battery",
    "runs_frequency_precheck",
    "runs_test",
    "serial_test",
]

PASS_THRESHOLD = 0.01

DEFAULT_FLOORS = {
    "frequency": 100,
    "block_frequency": 100,
    "cusum": 100,
    "runs": 100,
    "longest_run": 128,
    "dft": 1000,
    "approx_entropy": 64,
    "serial": 16,
}


class InsufficientData(ValueError):
    """Input stream is shorter than the test's minimum length."""


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64).ravel()
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("input must contain only bits 0/1")
    return arr


def _check_floor(n: int, name: str, floor: int | None) -> None:
    need = DEFAULT_FLOORS[name] if floor is None else floor
    if n < need:
        raise InsufficientData(f"{name} test needs >= {need} bits, got {n}")


def frequency_test(bits, floor: int | None = None) -> float:
    """Monobit test: p = erfc(|S_n| / sqrt(2 n)) for the +-1 sum S_n."""
    eps = _as_bits(bits)
    _check_floor(len(eps), "frequency", floor)
    s = abs(int(2 * eps.sum() - len(eps)))
    return float(erfc(s / math.sqrt(2.0 * len(eps))))


def block_frequency_test(bits, block_size: int | None = None,
                         floor: int | None = None) -> float:
    """Chi-square of per-block one-proportions against 1/2."""
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "block_frequency", floor)
    m = _default_block_size(n) if block_size is None else block_size
    if not 1 <= m <= n:
        raise ValueError("block_size must be in [1, n]")
    k = n // m
    pi = eps[:k * m].reshape(k, m).mean(axis=1)
    chi2 = 4.0 * m * float(np.sum((pi - 0.5) ** 2))
    return float(gammaincc(k / 2.0, chi2 / 2.0))


def _default_block_size(n: int) -> int:
    # >= 20 bits per block and at most ~100 blocks
    return max(20, -(-n // 100))


def cusum_test(bits, direction: str = "forward", floor: int | None = None) -> float:
    """Maximal partial-sum excursion of the +-1 walk.

    The reverse direction processes the reversed sequence.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError("direction must be 'forward' or 'reverse'")
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "cusum", floor)
    x = 2 * eps - 1
    if direction == "reverse":
        x = x[::-1]
    z = int(np.max(np.abs(np.cumsum(x))))
    if z == 0:
        return 1.0
    sqn = math.sqrt(n)
    k1 = np.arange((-n // z + 1) // 4, (n // z - 1) // 4 + 1)
    k2 = np.arange((-n // z - 3) // 4, (n // z - 1) // 4 + 1)
    term1 = np.sum(norm.cdf((4 * k1 + 1) * z / sqn)
                   - norm.cdf((4 * k1 - 1) * z / sqn))
    term2 = np.sum(norm.cdf((4 * k2 + 3) * z / sqn)
                   - norm.cdf((4 * k2 + 1) * z / sqn))
    return float(min(max(1.0 - term1 + term2, 0.0), 1.0))


def runs_frequency_precheck(bits) -> bool:
    """Frequency condition required for the runs statistic to be valid."""
    eps = _as_bits(bits)
    n = len(eps)
    pi = eps.mean() if n else 0.0
    return abs(pi - 0.5) < 2.0 / math.sqrt(n) if n else False


def runs_test(bits, floor: int | None = None) -> float:
    """Total number of runs; returns 0.0 when the frequency precheck fails."""
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "runs", floor)
    if not runs_frequency_precheck(eps):
        return 0.0
    pi = float(eps.mean())
    v = 1 + int(np.sum(eps[1:] != eps[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return float(erfc(num / den))


_LONGEST_RUN_TABLES = (
    # (min_n, block_size, categories, probabilities)
    (750000, 10000, (10, 11, 12, 13, 14, 15, 16),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 5, 6, 7, 8, 9),
     (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, (1, 2, 3, 4),
     (0.2148, 0.3672, 0.2305, 0.1875)),
)


def _longest_run_in_block(block: np.ndarray) -> int:
    best = cur = 0
    for b in block:
        cur = cur + 1 if b else 0
        best = max(best, cur)
    return best


def longest_run_test(bits, floor: int | None = None) -> float:
    """Longest run of ones per block, chi-squared against tabulated bins."""
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "longest_run", floor)
    if n < 128:
        raise InsufficientData("longest_run test needs >= 128 bits")
    for min_n, m, cats, probs in _LONGEST_RUN_TABLES:
        if n >= min_n:
            break
    k = n // m
    blocks = eps[:k * m].reshape(k, m)
    longest = np.array([_longest_run_in_block(b) for b in blocks])
    nu = np.zeros(len(cats), dtype=np.int64)
    for run in longest:
        pos = int(np.clip(np.searchsorted(cats, run), 0, len(cats) - 1))
        if run > cats[pos]:
            pos = len(cats) - 1
        nu[pos] += 1
    expected = k * np.asarray(probs)
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    return float(gammaincc((len(cats) - 1) / 2.0, chi2 / 2.0))


def dft_test(bits, floor: int | None = None) -> float:
    """Spectral test: fraction of DFT peaks under the 95 % threshold."""
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "dft", floor)
    x = 2.0 * eps - 1.0
    modulus = np.abs(np.fft.fft(x))[: n // 2]
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = int(np.sum(modulus < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return float(erfc(abs(d) / math.sqrt(2.0)))


def _pattern_phi(eps: np.ndarray, m: int) -> float:
    """phi_m of the approximate-entropy statistic (wrap-around patterns)."""
    if m == 0:
        return 0.0
    n = len(eps)
    ext = np.concatenate([eps, eps[: m - 1]]) if m > 1 else eps
    # encode each overlapping m-pattern as an integer
    weights = 1 << np.arange(m - 1, -1, -1)
    codes = np.zeros(n, dtype=np.int64)
    for k in range(m):
        codes = codes + ext[k:k + n] * weights[k]
    counts = np.bincount(codes, minlength=1 << m)
    c = counts[counts > 0] / n
    return float(np.sum(c * np.log(c)))


def approx_entropy_test(bits, m: int | None = None,
                        floor: int | None = None) -> float:
    """Approximate entropy of overlapping m- and (m+1)-patterns."""
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "approx_entropy", floor)
    if m is None:
        m = _default_apen_m(n)
    if m < 1:
        raise ValueError("m must be >= 1")
    apen = _pattern_phi(eps, m) - _pattern_phi(eps, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return float(gammaincc(2 ** (m - 1), chi2 / 2.0))


def _default_apen_m(n: int) -> int:
    return max(1, min(3, int(math.log2(n)) - 5))


def _psi_sq(eps: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    n = len(eps)
    ext = np.concatenate([eps, eps[: m - 1]]) if m > 1 else eps
    weights = 1 << np.arange(m - 1, -1, -1)
    codes = np.zeros(n, dtype=np.int64)
    for k in range(m):
        codes = codes + ext[k:k + n] * weights[k]
    counts = np.bincount(codes, minlength=1 << m)
    return float((1 << m) / n * np.sum(counts.astype(float) ** 2) - n)


def serial_test(bits, m: int | None = None,
                floor: int | None = None) -> tuple[float, float]:
    """Overlapping m-pattern uniformity; returns two p-values."""
    eps = _as_bits(bits)
    n = len(eps)
    _check_floor(n, "serial", floor)
    if m is None:
        m = _default_serial_m(n)
    if m < 2:
        raise ValueError("m must be >= 2")
    psi_m = _psi_sq(eps, m)
    psi_m1 = _psi_sq(eps, m - 1)
    psi_m2 = _psi_sq(eps, m - 2)
    d1 = psi_m - psi_m1
    d2 = psi_m - 2.0 * psi_m1 + psi_m2
    p1 = float(gammaincc(2 ** (m - 2), d1 / 2.0))
    p2 = float(gammaincc(2 ** (m - 3), d2 / 2.0))
    return p1, p2


def _default_serial_m(n: int) -> int:
    return max(2, min(5, int(math.log2(n)) - 7))


@dataclass(frozen=True)
class TestResult:
    name: str
    p_values: tuple[float, ...]
    passed: bool
    note: str = ""

    @property
    def p_value(self) -> float:
        return self.p_values[0]


@dataclass
class RandomnessReport:
    """Battery outcome: one row per test, plus the recorded parameters."""

    input_length: int
    results: list[TestResult] = field(default_factory=list)
    parameters: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        """True when every test that ran passed (skipped tests excluded)."""
        ran = [r for r in self.results if r.p_values]
        return bool(ran) and all(r.passed for r in ran)

    def result(self, name: str) -> TestResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def rows(self) -> list[tuple[str, str, str]]:
        out = []
        for r in self.results:
            ps = ", ".join(f"{p:.6f}" for p in r.p_values)
            out.append((r.name, ps, "pass" if r.passed else "FAIL"))
        return out


_BATTERY_ORDER = (
    "frequency",
    "block_frequency",
    "cusum_forward",
    "cusum_reverse",
    "runs",
    "longest_run",
    "dft",
    "approx_entropy",
    "serial",
)


def run_battery(bits, block_size: int | None = None,
                apen_m: int | None = None, serial_m: int | None = None,
                floors: dict | None = None) -> RandomnessReport:
    """Run all eight tests and collect a pass/fail report.

    ``floors`` may override per-test minimum lengths (keys as in
    :data:`DEFAULT_FLOORS`).  Tests whose floor is not met are recorded
    as skipped rather than failing the battery.
    """
    eps = _as_bits(bits)
    n = len(eps)
    floors = floors or {}
    block_size = block_size if block_size is not None else _default_block_size(n)
    apen_m = apen_m if apen_m is not None else _default_apen_m(max(n, 64))
    serial_m = serial_m if serial_m is not None else _default_serial_m(max(n, 16))
    report = RandomnessReport(input_length=n, parameters={
        "block_size": block_size, "apen_m": apen_m, "serial_m": serial_m,
    })

    def floor_of(name: str) -> int | None:
        return floors.get(name)

    for name in _BATTERY_ORDER:
        note = ""
        try:
            if name == "frequency":
                ps: tuple[float, ...] = (frequency_test(eps, floor=floor_of(name)),)
            elif name == "block_frequency":
                ps = (block_frequency_test(eps, block_size, floor=floor_of(name)),)
            elif name == "cusum_forward":
                ps = (cusum_test(eps, "forward", floor=floor_of("cusum")),)
            elif name == "cusum_reverse":
                ps = (cusum_test(eps, "reverse", floor=floor_of("cusum")),)
            elif name == "runs":
                ps = (runs_test(eps, floor=floor_of(name)),)
                if not runs_frequency_precheck(eps):
                    note = "FrequencyPrecheckFailed"
            elif name == "longest_run":
                ps = (longest_run_test(eps, floor=floor_of(name)),)
            elif name == "dft":
                ps = (dft_test(eps, floor=floor_of(name)),)
            elif name == "approx_entropy":
                ps = (approx_entropy_test(eps, apen_m, floor=floor_of(name)),)
            else:
                ps = serial_test(eps, serial_m, floor=floor_of(name))
        except InsufficientData as exc:
            report.results.append(TestResult(name, (), False, f"skipped: {exc}"))
            continue
        passed = all(p > PASS_THRESHOLD for p in ps)
        report.results.append(TestResult(name, ps, passed, note))
    return report

"""Inter-vehicle RSS generation under log-distance path loss and shadowing.

All RSS arithmetic is in dB.  The RSS of a link is the path attenuation
``H = P_tx - P_rx``; linear-domain conversion happens only inside the
leader-pair estimator, which inverts measured attenuations to distances,
differences them, and maps the difference back to dB.

Randomness model of :func:`generate_trace`, per slot:

* shadowing per link, zero-mean Gaussian in dB with total standard
  deviation ``shadowing_sigma_db``.  A configurable fraction of the
  shadowing *variance* is a component common to all platoon links in the
  same slot (roadside environment seen by the whole convoy); the rest is
  link-private.  The common part is what the follower-side estimator can
  recover, since scaling both inverted distances by the same factor
  shifts the estimate by exactly that factor in dB.
* optional AR(1) temporal correlation of the shadowing processes.
* optional receiver measurement noise whose standard deviation scales
  with the mean path attenuation of the link (weak signal, noisy RSSI).
* optional reciprocity perturbation between the two lead vehicles'
  readings of the same slot (half-duplex time offset).

The eavesdropper's links draw from an RNG stream disjoint from the
platoon's, and its shadowing (common and private) is independent of the
platoon's, so its observations share no randomness with the key source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "ChannelParams",
    "EstimationFailure",
    "PlatoonGeometry",
    "RssTrace",
    "distance_from_rss",
    "estimate_leader_rss",
    "generate_trace",
    "receive_power",
    "rss_of_link",
]

EAVESDROPPER_POSITIONS = ("P1", "P2", "P3")


class EstimationFailure(ValueError):
    """The inferred distance difference is not positive; the slot's
    estimate is invalid and is excluded from quantization."""


@dataclass(frozen=True)
class ChannelParams:
    """Radio propagation constants.

    Parameters
    ----------
    tx_power_dbm:
        Beacon transmit power (dBm).
    channel_constant_db:
        Fixed channel constant added to the receive power (dB).
    path_loss_exponent:
        Path-loss exponent, > 0.
    shadowing_sigma_db:
        Total standard deviation of the per-link log-normal shadowing (dB).
    rss_decode_floor_db:
        A-priori minimum RSS usable for decoding; the lowest quantization
        boundary.  Must sit below every *measured* link RSS in a valid
        configuration (derived estimates may still dip below it and are
        then dropped as out of range).
    shadowing_common_fraction:
        Fraction of shadowing variance shared by all platoon links in a
        slot.  0 reproduces fully independent per-link shadowing.
    shadowing_autocorr:
        First-order temporal autocorrelation of each shadowing process.
    reciprocity_sigma_db:
        Std of the perturbation between the two lead vehicles' readings
        of the same slot.
    measurement_noise_db:
        Receiver RSS noise std at 0 dB path attenuation; the effective
        std of a reading on a link with mean attenuation ``H`` is
        ``measurement_noise_db * 10**(H / 20)``.
    """

    tx_power_dbm: float = 0.0
    channel_constant_db: float = 3.0
    path_loss_exponent: float = 2.0
    shadowing_sigma_db: float = 3.0
    rss_decode_floor_db: float = -15.0
    shadowing_common_fraction: float = 0.0
    shadowing_autocorr: float = 0.0
    reciprocity_sigma_db: float = 0.0
    measurement_noise_db: float = 0.0

    def __post_init__(self) -> None:
        if not self.path_loss_exponent > 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be >= 0")
        if not math.isfinite(self.rss_decode_floor_db):
            raise ValueError("rss_decode_floor_db must be finite")
        if not 0.0 <= self.shadowing_common_fraction <= 1.0:
            raise ValueError("shadowing_common_fraction must be in [0, 1]")
        if not -1.0 < self.shadowing_autocorr < 1.0:
            raise ValueError("shadowing_autocorr must be in (-1, 1)")
        if self.reciprocity_sigma_db < 0 or self.measurement_noise_db < 0:
            raise ValueError("noise sigmas must be >= 0")

    def mean_attenuation_db(self, distance_m: float) -> float:
        """Deterministic part of the link RSS at the given distance."""
        return (10.0 * self.path_loss_exponent * math.log10(distance_m)
                - self.channel_constant_db)


@dataclass(frozen=True)
class PlatoonGeometry:
    """Collinear platoon with a uniform inter-vehicle gap.

    Vehicle ``i`` sits at longitudinal coordinate ``(i - 1) * pair_distance_m``.
    The eavesdropper position is one of the tags P1 (abreast of the midpoint
    of the lead pair), P2 (abreast of the midpoint of vehicles 3 and 4) or
    P3 (on the lane axis behind the tail vehicle); ``eavesdropper_distance_m``
    is its lateral offset for P1/P2 and its gap behind the tail for P3.
    """

    n_vehicles: int
    pair_distance_m: float
    eavesdropper_position: str = "P1"
    eavesdropper_distance_m: float = 3.0

    def __post_init__(self) -> None:
        if self.n_vehicles < 3:
            raise ValueError("n_vehicles must be >= 3")
        if self.pair_distance_m <= 0:
            raise ValueError("pair_distance_m must be > 0")
        if self.eavesdropper_position not in EAVESDROPPER_POSITIONS:
            raise ValueError(f"eavesdropper_position must be one of {EAVESDROPPER_POSITIONS}")
        if self.eavesdropper_distance_m < 3.0:
            raise ValueError("eavesdropper closer than 3 m would be identified")
        if self.eavesdropper_position == "P2" and self.n_vehicles < 4:
            raise ValueError("position P2 requires at least 4 vehicles")

    def vehicle_x(self, i: int) -> float:
        return (i - 1) * self.pair_distance_m

    def link_distance(self, i: int, j: int) -> float:
        return abs(self.vehicle_x(i) - self.vehicle_x(j))

    def eavesdropper_xy(self) -> tuple[float, float]:
        d = self.eavesdropper_distance_m
        if self.eavesdropper_position == "P1":
            return 0.5 * self.pair_distance_m, d
        if self.eavesdropper_position == "P2":
            return 2.5 * self.pair_distance_m, d
        return self.vehicle_x(self.n_vehicles) + d, 0.0

    def eavesdropper_link_distances(self) -> tuple[float, float]:
        """Distances from the two lead vehicles to the eavesdropper."""
        ex, ey = self.eavesdropper_xy()
        d1 = math.hypot(ex - self.vehicle_x(1), ey)
        d2 = math.hypot(ex - self.vehicle_x(2), ey)
        return d1, d2


@dataclass
class RssTrace:
    """Per-slot RSS sequences for one key-agreement iteration.

    ``values[i-1]`` holds vehicle ``i``'s sequence: the measured leader-pair
    RSS for vehicles 1 and 2, the estimated leader-pair RSS for vehicles
    3..N.  Invalid entries (failed estimates) are NaN with ``valid`` False.
    """

    slots: int
    values: np.ndarray            # (n_vehicles, slots) float
    valid: np.ndarray             # (n_vehicles, slots) bool
    eavesdropper: np.ndarray      # (slots,) float
    eavesdropper_valid: np.ndarray  # (slots,) bool

    @property
    def n_vehicles(self) -> int:
        return self.values.shape[0]

    def per_vehicle(self, i: int) -> np.ndarray:
        if not 1 <= i <= self.n_vehicles:
            raise KeyError(f"vehicle index {i} out of range")
        return self.values[i - 1]


def receive_power(params: ChannelParams, distance_m, shadowing_db):
    """Receive power (dBm) at the given distance and realized shadowing.

    ``P_rx = P_tx + constant - 10 * eta * log10(d) + shadowing``.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance_m must be > 0")
    return (params.tx_power_dbm + params.channel_constant_db
            - 10.0 * params.path_loss_exponent * np.log10(d)
            + np.asarray(shadowing_db, dtype=float))


def rss_of_link(params: ChannelParams, distance_m, shadowing_db):
    """Link RSS in dB: transmit power minus receive power."""
    return params.tx_power_dbm - receive_power(params, distance_m, shadowing_db)


def distance_from_rss(params: ChannelParams, rss_db, shadowing_db):
    """Invert the path-loss law: distance (m) implied by an RSS reading."""
    num = (np.asarray(rss_db, dtype=float) + params.channel_constant_db
           + np.asarray(shadowing_db, dtype=float))
    return 10.0 ** (num / (10.0 * params.path_loss_exponent))


def estimate_leader_rss(params: ChannelParams, h_1j: float, h_2j: float) -> float:
    """Estimate the leader-pair RSS from one follower's two link readings.

    The follower inverts both readings to distances assuming zero realized
    shadowing (it cannot observe it), differences them, and maps the
    difference back to dB.  Raises :class:`EstimationFailure` when the
    implied distance difference is not positive.
    """
    d1 = distance_from_rss(params, h_1j, 0.0)
    d2 = distance_from_rss(params, h_2j, 0.0)
    diff = d1 - d2
    if not diff > 0:
        raise EstimationFailure(
            f"non-positive implied distance difference ({diff:.6g} m)")
    return (10.0 * params.path_loss_exponent * math.log10(diff)
            - params.channel_constant_db)


def _ar1(draws: np.ndarray, rho: float) -> np.ndarray:
    """Color iid standard normal rows with a stationary AR(1) filter."""
    if rho == 0.0:
        return draws
    scaled = draws * math.sqrt(1.0 - rho * rho)
    scaled[..., 0] = draws[..., 0]
    return lfilter([1.0], [1.0, -rho], scaled, axis=-1)


def _estimate_rows(params: ChannelParams, h1: np.ndarray, h2: np.ndarray):
    """Vectorized leader-pair estimation; returns (values, valid)."""
    d1 = distance_from_rss(params, h1, 0.0)
    d2 = distance_from_rss(params, h2, 0.0)
    diff = d1 - d2
    valid = diff > 0
    safe = np.where(valid, diff, 1.0)
    est = (10.0 * params.path_loss_exponent * np.log10(safe)
           - params.channel_constant_db)
    return np.where(valid, est, np.nan), valid


def generate_trace(params: ChannelParams, geometry: PlatoonGeometry,
                   slots: int, seed) -> RssTrace:
    """Generate one iteration's RSS trace, deterministically from the seed.

    Vehicles 1 and 2 receive the measured leader-pair RSS (vehicle 2's
    reading optionally offset by reciprocity noise), vehicles 3..N the
    estimate formed from their own two link readings, and the eavesdropper
    an estimate formed from its own, independently faded links.
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    platoon_ss, eaves_ss = ss.spawn(2)
    rng = np.random.default_rng(platoon_ss)
    erng = np.random.default_rng(eaves_ss)

    n = geometry.n_vehicles
    dv = geometry.pair_distance_m
    sigma = params.shadowing_sigma_db
    sig_c = sigma * math.sqrt(params.shadowing_common_fraction)
    sig_p = sigma * math.sqrt(1.0 - params.shadowing_common_fraction)
    rho = params.shadowing_autocorr
    a = params.measurement_noise_db

    def meas_sigma(distance: float) -> float:
        return a * 10.0 ** (params.mean_attenuation_db(distance) / 20.0)

    # Platoon links in fixed draw order: (1,2), then (1,j), (2,j) for j=3..N.
    n_links = 1 + 2 * (n - 2)
    common = sig_c * _ar1(rng.standard_normal(slots), rho)
    private = sig_p * _ar1(rng.standard_normal((n_links, slots)), rho)
    meas = rng.standard_normal((2 + 2 * (n - 2), slots))  # v1, v2, then per estimator link
    recip = params.reciprocity_sigma_db * rng.standard_normal(slots)

    values = np.empty((n, slots))
    valid = np.ones((n, slots), dtype=bool)

    h12 = rss_of_link(params, dv, common + private[0])
    values[0] = h12 + meas_sigma(dv) * meas[0]
    values[1] = h12 + meas_sigma(dv) * meas[1] + recip

    for j in range(3, n + 1):
        k = j - 3
        d1j = geometry.link_distance(1, j)
        d2j = geometry.link_distance(2, j)
        h1j = (rss_of_link(params, d1j, common + private[1 + 2 * k])
               + meas_sigma(d1j) * meas[2 + 2 * k])
        h2j = (rss_of_link(params, d2j, common + private[2 + 2 * k])
               + meas_sigma(d2j) * meas[3 + 2 * k])
        values[j - 1], valid[j - 1] = _estimate_rows(params, h1j, h2j)

    # Eavesdropper: same propagation constants, disjoint RNG stream and
    # fully independent shadowing (common component included).
    d1e, d2e = geometry.eavesdropper_link_distances()
    e_common = sig_c * _ar1(erng.standard_normal(slots), rho)
    e_private = sig_p * _ar1(erng.standard_normal((2, slots)), rho)
    e_meas = erng.standard_normal((2, slots))
    h1e = (rss_of_link(params, d1e, e_common + e_private[0])
           + meas_sigma(d1e) * e_meas[0])
    h2e = (rss_of_link(params, d2e, e_common + e_private[1])
           + meas_sigma(d2e) * e_meas[1])
    eaves, eaves_valid = _estimate_rows(params, h1e, h2e)

    return RssTrace(slots=slots, values=values, valid=valid,
                    eavesdropper=eaves, eavesdropper_valid=eaves_valid)

"""Two-stage dissemination cycle: key agreement, then encrypted forwarding.

Stage one (CSKA) lets the vehicles beacon strictly in turn from the
leader to the tail; a beacon not received by its checker is retransmitted
by its sender, and each of the Z passes commits one RSS trace.  Stage two
(EVCD) has the leader encrypt the command with its key and forward it
hop by hop; every vehicle decrypts with its own key and re-encrypts for
the next hop, the tail answers with a one-bit ACK, and hop losses are
retried by the hop sender with an end-to-end leader retransmission as
the fallback.  The cipher is a repeating-keystream XOR placeholder so
key disagreements surface as observable decode failures.

After the Z passes each vehicle holds Z per-iteration keys.  The agreed
key is extracted from the slot-wise average of the vehicle's own RSS
sequences across iterations: averaging needs no exchange of key
material and shrinks the estimation noise relative to the shared
randomness, so more iterations give better agreement.  (A per-bit
majority vote over the Z keys does the opposite here: the iterations
carry independent slot randomness, and majority voting over noisy
copies of independent fair bits amplifies disagreement near the 50 %
margin instead of suppressing it.)

Event timing is slotted: every transmission occupies one slot, and
modeled latency is reported separately from wall-clock compute time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, PlatoonGeometry, RssTrace, generate_trace
from .keygen import GrayCodebook, KeygenConfig, SecretKey, bmmr, extract_key
from .quantizer import (
    IntervalSet,
    QuantizerConfig,
    optimize_intervals,
    quantize_trace,
)

__all__ = [
    "AgreementReport",
    "CycleAbort",
    "CycleLog",
    "DisseminationFailure",
    "ProtocolConfig",
    "TransmissionEvent",
    "run_cska",
    "run_cycle",
    "run_evcd",
    "xor_cipher",
]


class CycleAbort(RuntimeError):
    """A beacon exhausted its retransmission budget during CSKA."""


class DisseminationFailure(RuntimeError):
    """EVCD ran out of end-to-end retries."""


@dataclass(frozen=True)
class ProtocolConfig:
    z_iterations: int = 1
    beacon_bits: int = 8
    data_payload_bits: int = 800
    beacon_loss_prob: float = 0.0
    data_loss_prob: float = 0.0
    dissemination_timeout_ms: float = 3000.0
    slot_duration_ms: float = 1.0
    retransmission_cap: int = 10

    def __post_init__(self) -> None:
        if self.z_iterations < 1:
            raise ValueError("z_iterations must be >= 1")
        if self.beacon_bits < 1 or self.data_payload_bits < 1:
            raise ValueError("packet sizes must be >= 1 bit")
        for p in (self.beacon_loss_prob, self.data_loss_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("loss probabilities must be in [0, 1]")
        if self.dissemination_timeout_ms <= 0 or self.slot_duration_ms <= 0:
            raise ValueError("timeout and slot duration must be > 0")
        if self.retransmission_cap < 0:
            raise ValueError("retransmission_cap must be >= 0")


@dataclass(frozen=True)
class TransmissionEvent:
    """One transmission in the slotted event trace."""

    slot: int
    stage: str       # "cska" | "evcd"
    sender: int      # vehicle index, 1-based
    receiver: int    # checking receiver of the transmission
    kind: str        # "beacon" | "data" | "ack"
    outcome: str     # "delivered" | "lost"


@dataclass
class CycleLog:
    """Counters and artifacts of one dissemination cycle."""

    beacon_transmissions: int = 0
    retransmissions: int = 0
    overhead_bits: int = 0
    evcd_hops_completed: int = 0
    end_to_end_latency_ms: float = 0.0
    keys_per_vehicle: dict[int, list[SecretKey]] = field(default_factory=dict)
    eavesdropper_keys: list[SecretKey] = field(default_factory=list)
    events: list[TransmissionEvent] = field(default_factory=list)
    cska_latency_ms: float = 0.0
    evcd_latency_ms: float = 0.0
    evcd_data_transmissions: int = 0
    evcd_hop_retransmissions: int = 0
    leader_retransmissions: int = 0
    timeouts: int = 0
    slots_used: int = 0
    decode_failure_hops: list[int] = field(default_factory=list)
    recovered_commands: dict[int, np.ndarray] = field(default_factory=dict)


def run_cska(config: ProtocolConfig, params: ChannelParams,
             geometry: PlatoonGeometry, slots: int, seed
             ) -> tuple[list[RssTrace], CycleLog]:
    """Run the Z beacon passes and commit one RSS trace per pass.

    Beacons go out strictly sequentially from vehicle 1 to vehicle N
    (half duplex: one transmission per slot, nobody both sends and
    receives in the same slot).  A lost beacon is retransmitted by its
    sender; more than ``retransmission_cap`` retries abort the cycle.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    loss_ss, trace_ss = ss.spawn(2)
    loss_rng = np.random.default_rng(loss_ss)
    trace_seeds = trace_ss.spawn(config.z_iterations)

    log = CycleLog()
    n = geometry.n_vehicles
    slot = 0
    traces: list[RssTrace] = []
    for z in range(config.z_iterations):
        for sender in range(1, n + 1):
            checker = sender + 1 if sender < n else sender - 1
            retries = 0
            while True:
                slot += 1
                lost = loss_rng.random() < config.beacon_loss_prob
                log.beacon_transmissions += 1
                log.events.append(TransmissionEvent(
                    slot, "cska", sender, checker, "beacon",
                    "lost" if lost else "delivered"))
                if not lost:
                    break
                log.retransmissions += 1
                retries += 1
                if retries > config.retransmission_cap:
                    raise CycleAbort(
                        f"beacon of vehicle {sender} exceeded "
                        f"{config.retransmission_cap} retransmissions")
        traces.append(generate_trace(params, geometry, slots, trace_seeds[z]))
    log.overhead_bits = log.beacon_transmissions * config.beacon_bits
    log.slots_used = slot
    log.cska_latency_ms = slot * config.slot_duration_ms
    return traces, log


def xor_cipher(payload: np.ndarray, key: SecretKey) -> np.ndarray:
    """Repeating-keystream XOR; its own inverse for a fixed key."""
    data = np.asarray(payload, dtype=np.uint8)
    kb = key.as_array()
    if kb.size == 0:
        raise ValueError("cannot build a keystream from an empty key")
    reps = -(-data.size // kb.size)
    stream = np.tile(kb, reps)[: data.size]
    return data ^ stream


def run_evcd(config: ProtocolConfig, keys: dict[int, SecretKey],
             command_bits: np.ndarray, seed, log: CycleLog | None = None
             ) -> CycleLog:
    """Forward the encrypted command hop by hop to the tail.

    Every vehicle decrypts with its own key and re-encrypts for the next
    hop, so a key disagreement at any vehicle corrupts the recovered
    command from that hop on.  Hop losses are retried by the hop sender
    up to the retransmission cap; an exhausted hop (or a lost tail ACK)
    times out at the leader, which starts the dissemination over with a
    fresh packet, itself capped before :class:`DisseminationFailure`.
    """
    vehicles = sorted(keys)
    n = len(vehicles)
    if n < 2:
        raise ValueError("EVCD needs at least two vehicles")
    lengths = {len(keys[v]) for v in vehicles}
    if len(lengths) != 1:
        raise ValueError("every vehicle must hold a key of identical length")
    command = np.asarray(command_bits, dtype=np.uint8)
    log = log if log is not None else CycleLog()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)

    slot = log.slots_used
    attempts = 0
    while True:
        attempts += 1
        recovered = {vehicles[0]: command.copy()}
        failed = False
        for hop in range(n - 1):
            sender, receiver = vehicles[hop], vehicles[hop + 1]
            packet = xor_cipher(recovered[sender], keys[sender])
            retries = 0
            delivered = False
            while retries <= config.retransmission_cap:
                slot += 1
                log.evcd_data_transmissions += 1
                lost = rng.random() < config.data_loss_prob
                log.events.append(TransmissionEvent(
                    slot, "evcd", sender, receiver, "data",
                    "lost" if lost else "delivered"))
                if not lost:
                    delivered = True
                    break
                log.evcd_hop_retransmissions += 1
                retries += 1
            if not delivered:
                failed = True
                break
            recovered[receiver] = xor_cipher(packet, keys[receiver])
            log.evcd_hops_completed = max(log.evcd_hops_completed, hop + 1)
        if not failed:
            # one-bit ACK from the tail back toward the leader
            slot += 1
            ack_lost = rng.random() < config.data_loss_prob
            log.events.append(TransmissionEvent(
                slot, "evcd", vehicles[-1], vehicles[0], "ack",
                "lost" if ack_lost else "delivered"))
            if not ack_lost:
                break
        log.timeouts += 1
        log.evcd_latency_ms += config.dissemination_timeout_ms
        if attempts > config.retransmission_cap:
            raise DisseminationFailure(
                f"dissemination failed after {attempts} end-to-end attempts")
        log.leader_retransmissions += 1

    log.recovered_commands = recovered
    log.decode_failure_hops = [
        h + 1 for h, v in enumerate(vehicles[1:])
        if not np.array_equal(recovered.get(v, command), command)
    ]
    log.evcd_latency_ms += (slot - log.slots_used) * config.slot_duration_ms
    log.slots_used = slot
    log.end_to_end_latency_ms = log.cska_latency_ms + log.evcd_latency_ms
    return log


@dataclass
class AgreementReport:
    """Outcome of one full cycle for one seed."""

    n_vehicles: int
    bmmr_per_vehicle: dict[int, float]
    eavesdropper_bmmr: float
    dissemination_success: bool
    decode_failure_hops: list[int]
    agreed_key_bits: int
    retained_per_iteration: list[int]
    log: CycleLog
    leader_key: SecretKey | None = None
    intervals: IntervalSet | None = None

    @property
    def mean_bmmr(self) -> float:
        vals = list(self.bmmr_per_vehicle.values())
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def tail_bmmr(self) -> float:
        return self.bmmr_per_vehicle[self.n_vehicles]


def _averaged_trace(traces: list[RssTrace]) -> RssTrace:
    """Slot-wise mean of each vehicle's sequences over valid iterations.

    A slot stays valid for a vehicle when at least one iteration observed
    it; validity flags are shareable (they carry no RSS values), so the
    averaging is synchronized across vehicles.
    """
    if len(traces) == 1:
        return traces[0]
    values = np.stack([t.values for t in traces])    # (Z, N, T)
    valid = np.stack([t.valid for t in traces])
    counts = valid.sum(axis=0)
    sums = np.where(valid, np.nan_to_num(values), 0.0).sum(axis=0)
    avg_valid = counts > 0
    avg = np.where(avg_valid, sums / np.maximum(counts, 1), np.nan)
    evalues = np.stack([t.eavesdropper for t in traces])
    evalid = np.stack([t.eavesdropper_valid for t in traces])
    ecounts = evalid.sum(axis=0)
    esums = np.where(evalid, np.nan_to_num(evalues), 0.0).sum(axis=0)
    eavg_valid = ecounts > 0
    eavg = np.where(eavg_valid, esums / np.maximum(ecounts, 1), np.nan)
    return RssTrace(slots=traces[0].slots, values=avg, valid=avg_valid,
                    eavesdropper=eavg, eavesdropper_valid=eavg_valid)


def _keys_from_trace(trace: RssTrace, params: ChannelParams,
                     quant: QuantizerConfig, keygen: KeygenConfig,
                     iteration: int) -> tuple[dict[int, SecretKey], SecretKey, IntervalSet, int]:
    intervals, _ = optimize_intervals(
        trace, quant.n_intervals, quant.grid_size,
        floor=params.rss_decode_floor_db)
    qt = quantize_trace(trace, intervals)
    q = keygen.resolve_bits(quant.n_intervals)
    codebook = GrayCodebook(codeword_bits=q, n_bins=quant.n_intervals)
    keys = {
        i: extract_key(qt.bins[i - 1], codebook, keygen.map_mode,
                       keygen.append_complement, owner=i, iteration=iteration)
        for i in range(1, trace.n_vehicles + 1)
    }
    ekey = extract_key(qt.eavesdropper_bins, codebook, keygen.map_mode,
                       keygen.append_complement, owner=0, iteration=iteration)
    return keys, ekey, intervals, qt.n_retained


def run_cycle(params: ChannelParams, geometry: PlatoonGeometry,
              protocol: ProtocolConfig, quant: QuantizerConfig,
              keygen: KeygenConfig, slots: int, seed) -> AgreementReport:
    """One full dissemination cycle: CSKA, key extraction, EVCD, report."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cska_ss, evcd_ss, cmd_ss = ss.spawn(3)

    traces, log = run_cska(protocol, params, geometry, slots, cska_ss)

    retained: list[int] = []
    for z, trace in enumerate(traces, start=1):
        keys_z, ekey_z, _, kept = _keys_from_trace(
            trace, params, quant, keygen, iteration=z)
        retained.append(kept)
        for i, k in keys_z.items():
            log.keys_per_vehicle.setdefault(i, []).append(k)
        log.eavesdropper_keys.append(ekey_z)

    agreed_keys, agreed_ekey, intervals, _ = _keys_from_trace(
        _averaged_trace(traces), params, quant, keygen, iteration=0)

    leader = agreed_keys[1]
    bmmrs = {i: bmmr(leader, agreed_keys[i])
             for i in range(2, geometry.n_vehicles + 1)}
    eaves_bmmr = bmmr(leader, agreed_ekey)

    cmd_rng = np.random.default_rng(cmd_ss)
    command = cmd_rng.integers(0, 2, size=protocol.data_payload_bits,
                               dtype=np.uint8)
    success = True
    try:
        run_evcd(protocol, agreed_keys, command, evcd_ss, log)
        decode_failures = list(log.decode_failure_hops)
        success = not decode_failures
    except DisseminationFailure:
        success = False
        decode_failures = []

    return AgreementReport(
        n_vehicles=geometry.n_vehicles,
        bmmr_per_vehicle=bmmrs,
        eavesdropper_bmmr=eaves_bmmr,
        dissemination_success=success,
        decode_failure_hops=decode_failures,
        agreed_key_bits=len(leader),
        retained_per_iteration=retained,
        log=log,
        leader_key=leader,
        intervals=intervals,
    )

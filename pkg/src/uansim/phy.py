"""Physical layer: modulation modes, SNR gating, spectrum occupancy, modem.

Reception is decided per packet from the sonar equation
``snr = source_level - transmission_loss - noise_level`` and the
configured policy: an SNR threshold per modulation mode, or a BER-derived
packet success probability (deterministic cutoff or a per-packet Bernoulli
draw).  Collisions are detected at subcarrier granularity: two
transmissions interfere at a receiver only when their time intervals
(including tail guard time), frequency bands, and subcarrier sets all
overlap.

The modem is half duplex.  Starting a transmission aborts any reception in
progress; packets arriving while the modem transmits are lost.  Energy is
metered from the modem state timeline (tx / rx / idle powers), so the
three state durations always partition the run exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

from uansim import ber as ber_models
from uansim.core import ConfigError, Simulator, seconds_to_ns
from uansim.packets import Header, Packet


class ModulationMode(Enum):
    BPSK = 1
    QPSK = 2
    QAM8 = 3
    QAM16 = 4
    QAM64 = 6

    @property
    def bits_per_symbol(self) -> int:
        return self.value

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "ModulationMode":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ConfigError(f"unknown modulation mode {name!r}") from None


MODE_ORDER = [ModulationMode.BPSK, ModulationMode.QPSK, ModulationMode.QAM8,
              ModulationMode.QAM16, ModulationMode.QAM64]


def transmission_rate(mode: ModulationMode, symbol_rate: float) -> float:
    """Bit rate in bits/s."""
    if symbol_rate <= 0:
        raise ConfigError("symbol rate must be positive")
    return symbol_rate * mode.bits_per_symbol


def rx_snr(tl_db: float, source_level_db: float, noise_level_db: float) -> float:
    """Passive sonar equation: SNR = SL - TL - NL (all dB)."""
    return source_level_db - tl_db - noise_level_db


def default_snr_thresholds(target_ber: float = 1e-3) -> dict[str, float]:
    """Per-mode SNR cutoffs derived from the analytic AWGN curves."""
    return {m.key: ber_models.snr_threshold_for_ber(m.key, target_ber) for m in MODE_ORDER}


@dataclass(frozen=True)
class SpectrumAllocation:
    """Subcarrier-level occupancy of one transmission."""

    band_start_hz: float
    total_bandwidth_hz: float
    num_subcarriers: int
    subcarrier_spacing_hz: float
    subcarrier_mask: int  # bitset of occupied subcarrier indices
    guard_time_s: float = 0.0

    def __post_init__(self):
        if self.num_subcarriers <= 0 or self.num_subcarriers > 64:
            raise ConfigError("num_subcarriers must be in 1..64")
        if self.num_subcarriers * self.subcarrier_spacing_hz > self.total_bandwidth_hz + 1e-9:
            raise ConfigError("subcarriers exceed the configured bandwidth")
        if self.subcarrier_mask <= 0:
            raise ConfigError("subcarrier_mask must select at least one subcarrier")
        if self.subcarrier_mask >> self.num_subcarriers:
            raise ConfigError("subcarrier_mask selects indices >= num_subcarriers")
        if self.guard_time_s < 0:
            raise ConfigError("guard time must be non-negative")

    @classmethod
    def full_band(cls, band_start_hz: float = 9000.0, total_bandwidth_hz: float = 6000.0,
                  num_subcarriers: int = 48, subcarrier_spacing_hz: float = 125.0,
                  guard_time_s: float = 0.0) -> "SpectrumAllocation":
        return cls(band_start_hz, total_bandwidth_hz, num_subcarriers,
                   subcarrier_spacing_hz, (1 << num_subcarriers) - 1, guard_time_s)

    def with_subcarriers(self, indices) -> "SpectrumAllocation":
        mask = 0
        for i in indices:
            mask |= 1 << i
        return replace(self, subcarrier_mask=mask)

    @property
    def band_end_hz(self) -> float:
        return self.band_start_hz + self.num_subcarriers * self.subcarrier_spacing_hz

    @property
    def center_frequency_khz(self) -> float:
        return (self.band_start_hz + 0.5 * self.total_bandwidth_hz) / 1000.0


def spectrum_overlaps(a: SpectrumAllocation, a_interval: tuple[float, float],
                      b: SpectrumAllocation, b_interval: tuple[float, float]) -> bool:
    """True iff guard-padded time intervals, bands, and subcarrier sets all intersect."""
    a_start, a_end = a_interval
    b_start, b_end = b_interval
    if a_start > b_end + b.guard_time_s or b_start > a_end + a.guard_time_s:
        return False
    if a.band_start_hz > b.band_end_hz or b.band_start_hz > a.band_end_hz:
        return False
    return bool(a.subcarrier_mask & b.subcarrier_mask)


@dataclass
class PhyConfig:
    mode: ModulationMode = ModulationMode.BPSK
    symbol_rate: float = 1500.0
    source_level_db: float = 170.0
    noise_level_db: float = 50.0
    reception_policy: str = "threshold"  # threshold | ber | ber_stochastic
    packet_success_threshold: float = 0.5
    snr_thresholds: dict[str, float] = field(default_factory=default_snr_thresholds)
    capture: bool = False  # SINR capture instead of all-drop on collision
    include_phy_header: bool = True  # spectrum/mode header on the air
    tx_power_w: float = 2.0
    rx_power_w: float = 0.1
    idle_power_w: float = 0.01

    @property
    def bit_rate(self) -> float:
        return transmission_rate(self.mode, self.symbol_rate)

    def tx_time_s(self, wire_bytes: int) -> float:
        return wire_bytes * 8.0 / self.bit_rate


def reception_decision(snr_db: float, mode: ModulationMode, wire_bytes: int,
                       cfg: PhyConfig, rng=None) -> tuple[bool, str]:
    """Gate a packet on SNR (threshold policy) or BER (deterministic/stochastic)."""
    threshold = cfg.snr_thresholds[mode.key]
    if cfg.reception_policy == "threshold":
        if snr_db >= threshold:
            return True, ""
        return False, "low_snr"
    ebn0 = ber_models.ebn0_from_snr(snr_db, mode.key)
    p_bit = ber_models.ber_analytic(mode.key, ebn0).ber
    p_ok = (1.0 - p_bit) ** (8 * wire_bytes)
    if cfg.reception_policy == "ber":
        if p_ok >= cfg.packet_success_threshold:
            return True, ""
        return False, "ber"
    if cfg.reception_policy == "ber_stochastic":
        if rng is None:
            raise ConfigError("stochastic reception needs an RNG stream")
        if rng.random() < p_ok:
            return True, ""
        return False, "ber"
    raise ConfigError(f"unknown reception policy {cfg.reception_policy!r}")


@dataclass
class RxAttempt:
    """One packet arriving at one receiver."""

    packet: Packet
    mode: ModulationMode
    spectrum: SpectrumAllocation
    start_s: float
    end_s: float
    snr_db: float
    fail_reason: str = ""
    collided: bool = False
    interference_lin: float = 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return (self.start_s, self.end_s)


def mark_overlaps(attempt: RxAttempt, active: list[RxAttempt]) -> None:
    """Pairwise collision marking against currently active receptions."""
    for other in active:
        if spectrum_overlaps(attempt.spectrum, attempt.interval,
                             other.spectrum, other.interval):
            attempt.collided = True
            other.collided = True
            attempt.interference_lin += 10.0 ** (other.snr_db / 10.0)
            other.interference_lin += 10.0 ** (attempt.snr_db / 10.0)


def resolve_collisions(entries: list[tuple[SpectrumAllocation, float, float]]) -> list[bool]:
    """Collision flags for a batch of (spectrum, start, end) receptions.

    Feeds the arrivals through the same incremental tracker the modem uses:
    attempts become active at start time and are pruned once no later
    arrival can overlap them.
    """
    order = sorted(range(len(entries)), key=lambda i: (entries[i][1], i))
    attempts = [RxAttempt(packet=None, mode=ModulationMode.BPSK, spectrum=s,
                          start_s=a, end_s=b, snr_db=0.0)
                for (s, a, b) in entries]
    active: list[RxAttempt] = []
    for i in order:
        att = attempts[i]
        active = [o for o in active if o.end_s + o.spectrum.guard_time_s >= att.start_s]
        mark_overlaps(att, active)
        active.append(att)
    return [a.collided for a in attempts]


class EnergyMeter:
    """Integrates tx/rx/idle power over the modem state timeline."""

    def __init__(self, tx_w: float, rx_w: float, idle_w: float):
        self.powers = {"tx": tx_w, "rx": rx_w, "idle": idle_w}
        self.state = "idle"
        self.since_ns = 0
        self.time_ns = {"tx": 0, "rx": 0, "idle": 0}

    def transition(self, now_ns: int, new_state: str) -> None:
        self.time_ns[self.state] += now_ns - self.since_ns
        self.since_ns = now_ns
        self.state = new_state

    def finalize(self, end_ns: int) -> None:
        self.transition(end_ns, self.state)

    @property
    def energy_j(self) -> float:
        return sum(self.powers[s] * t / 1e9 for s, t in self.time_ns.items())


class Modem:
    """Half-duplex acoustic modem bound to one node.

    The channel schedules ``handle_rx_start`` / ``handle_rx_end`` for every
    transmission in the water; the modem tracks concurrent arrivals, marks
    subcarrier-level collisions, and delivers surviving packets upward.
    """

    def __init__(self, sim: Simulator, node_id: int, cfg: PhyConfig,
                 spectrum: SpectrumAllocation,
                 trace: Callable, rx_enabled: bool = True):
        self.sim = sim
        self.node_id = node_id
        self.cfg = cfg
        self.spectrum = spectrum
        self.trace = trace
        self.rx_enabled = rx_enabled
        self.transmitting = False
        self.tx_end_ns = 0
        self.active_rx: list[RxAttempt] = []
        self.energy = EnergyMeter(cfg.tx_power_w, cfg.rx_power_w, cfg.idle_power_w)
        self.channel = None  # wired by the network
        self.on_tx_end: Optional[Callable[[], None]] = None
        self.deliver_up: Optional[Callable[[Packet], None]] = None

    # -- transmit path ----------------------------------------------------

    @property
    def busy(self) -> bool:
        return self.transmitting or bool(self.active_rx)

    @property
    def busy_until_s(self) -> float:
        ends = [self.tx_end_ns / 1e9] if self.transmitting else []
        ends += [a.end_s for a in self.active_rx]
        return max(ends, default=self.sim.now)

    def transmit(self, packet: Packet, mode: ModulationMode | None = None,
                 spectrum: SpectrumAllocation | None = None) -> bool:
        """Send one packet; returns False (traced drop) if already transmitting.

        The packet put on the air is a clone (empty tailer, plus the PHY
        spectrum/mode header when enabled), so the caller's copy stays
        untouched for MAC retries.

        Upper layers narrow the transmission to a subcarrier subset by
        writing a bitmask under the ``subcarrier_mask`` tailer key; an
        explicit ``spectrum`` argument wins over the tailer.
        """
        mode = mode or self.cfg.mode
        if spectrum is None:
            spectrum = self.spectrum
            requested = packet.tailer.get("subcarrier_mask")
            if isinstance(requested, int):
                spectrum = replace(spectrum, subcarrier_mask=requested)
        if self.transmitting:
            self.trace(self.node_id, "rx_drop", packet, reason="tx_busy")
            return False
        for att in self.active_rx:
            att.fail_reason = att.fail_reason or "half_duplex"
        wire_pkt = packet.clone_for_delivery()
        if self.cfg.include_phy_header:
            wire_pkt.push_header(Header("phy_info", self.node_id, packet.sink, packet.uid, {
                "mode": mode.bits_per_symbol,
                "band_start_hz": spectrum.band_start_hz,
                "subcarrier_spacing_hz": spectrum.subcarrier_spacing_hz,
                "num_subcarriers": spectrum.num_subcarriers,
                "subcarrier_mask": spectrum.subcarrier_mask,
                "guard_time_ms": int(spectrum.guard_time_s * 1000),
            }))
        tx_time = self.cfg.tx_time_s(wire_pkt.wire_length())
        self.transmitting = True
        self.tx_end_ns = self.sim.now_ns + seconds_to_ns(tx_time)
        self.energy.transition(self.sim.now_ns, "tx")
        self.trace(self.node_id, "tx_start", wire_pkt)
        self.channel.broadcast(self, wire_pkt, mode, spectrum, tx_time)
        self.sim.schedule(tx_time, lambda: self._finish_tx(wire_pkt))
        return True

    def _finish_tx(self, packet: Packet) -> None:
        self.transmitting = False
        self.energy.transition(self.sim.now_ns, "rx" if self.active_rx else "idle")
        self.trace(self.node_id, "tx_end", packet)
        if self.on_tx_end:
            self.on_tx_end()

    # -- receive path -----------------------------------------------------

    def handle_rx_start(self, attempt: RxAttempt) -> None:
        self.trace(self.node_id, "rx_start", attempt.packet, snr_db=attempt.snr_db)
        if self.transmitting:
            attempt.fail_reason = "half_duplex"
            return
        mark_overlaps(attempt, self.active_rx)
        if not self.active_rx:
            self.energy.transition(self.sim.now_ns, "rx")
        self.active_rx.append(attempt)

    def handle_rx_end(self, attempt: RxAttempt) -> None:
        if attempt in self.active_rx:
            self.active_rx.remove(attempt)
            if not self.active_rx and not self.transmitting:
                self.energy.transition(self.sim.now_ns, "idle")
        packet = attempt.packet
        if attempt.fail_reason:
            self.trace(self.node_id, "rx_drop", packet, reason=attempt.fail_reason,
                       snr_db=attempt.snr_db)
            return
        snr = attempt.snr_db
        if attempt.collided:
            if not self.cfg.capture:
                self.trace(self.node_id, "rx_drop", packet, reason="collision",
                           snr_db=snr)
                return
            snr = 10.0 * math.log10(
                (10.0 ** (attempt.snr_db / 10.0)) / max(attempt.interference_lin, 1e-30))
        rng = self.sim.rng(self.node_id, "reception")
        ok, reason = reception_decision(snr, attempt.mode, packet.wire_length(),
                                        self.cfg, rng)
        if not ok:
            reason = "collision" if attempt.collided else reason
            self.trace(self.node_id, "rx_drop", packet, reason=reason, snr_db=snr)
            return
        self.trace(self.node_id, "rx_ok", packet, snr_db=snr)
        delivered = packet.clone_for_delivery()
        if delivered.top_header("phy") is not None:
            delivered.pop_header("phy")
        # node-local cross-layer signal: upper layers can read the link
        # quality this hop saw; never transmitted, cleared at the next hop
        delivered.tailer.put("rx_snr_db", snr)
        if self.deliver_up:
            self.deliver_up(delivered)

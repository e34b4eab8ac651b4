"""Network assembly: channel, nodes, traffic generators, tracing, metrics.

A ``Simulation`` owns one event kernel, one shared channel, and a set of
nodes, each wiring mobility + modem + MAC + routing together.  Every
packet event appends one trace record; metrics are folded incrementally so
large runs can disable record storage entirely.
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Callable, IO, Optional

from uansim.core import Simulator
from uansim.packets import Packet
from uansim.phy import Modem, ModulationMode, RxAttempt, SpectrumAllocation, rx_snr

TRACE_EVENTS = ("enq", "tx_start", "tx_end", "rx_start", "rx_ok", "rx_drop",
                "deliver", "mac_give_up")


class ListTraceSink:
    def __init__(self):
        self.records: list[dict] = []

    def write(self, record: dict) -> None:
        self.records.append(record)

    def close(self) -> None:
        pass


class JsonlTraceSink:
    """One JSON object per line, flushed incrementally."""

    def __init__(self, stream: IO[str]):
        self.stream = stream

    def write(self, record: dict) -> None:
        self.stream.write(json.dumps(record, separators=(",", ":")) + "\n")

    def close(self) -> None:
        self.stream.flush()


class Metrics:
    """Incremental folding of trace events into run statistics."""

    def __init__(self):
        self.generated = 0
        self.delivered = 0
        self.delivered_bits = 0
        self.delays: list[float] = []
        self.drops: Counter = Counter()
        self.events = 0
        self.energy_j: dict[int, float] = {}
        self.node_generated: Counter = Counter()
        self.node_delivered: Counter = Counter()

    def on_event(self, t_s: float, event: str, packet: Packet, reason: str | None,
                 node_id: int = -1) -> None:
        self.events += 1
        if event == "enq":
            self.generated += 1
            self.node_generated[node_id] += 1
        elif event == "deliver":
            self.delivered += 1
            self.delivered_bits += packet.payload_size * 8
            self.delays.append(t_s - packet.created_s)
            self.node_delivered[node_id] += 1
        elif event in ("rx_drop", "mac_give_up") and reason:
            self.drops[reason] += 1

    @property
    def collisions(self) -> int:
        return self.drops.get("collision", 0)

    def summary(self, duration_s: float) -> dict:
        delays = self.delays
        return {
            "generated": self.generated,
            "delivered": self.delivered,
            "delivery_ratio": self.delivered / self.generated if self.generated else 0.0,
            "throughput_bps": self.delivered_bits / duration_s if duration_s > 0 else 0.0,
            "delay_mean_s": statistics.fmean(delays) if delays else 0.0,
            "delay_median_s": statistics.median(delays) if delays else 0.0,
            "delay_p95_s": (sorted(delays)[max(0, int(0.95 * len(delays)) - 1)]
                            if delays else 0.0),
            "collisions": self.collisions,
            "drops": dict(sorted(self.drops.items())),
            "energy_j": {str(k): round(v, 9) for k, v in sorted(self.energy_j.items())},
            "energy_total_j": round(sum(self.energy_j.values()), 9),
            "per_node": {str(k): {"generated": self.node_generated.get(k, 0),
                                  "delivered": self.node_delivered.get(k, 0),
                                  "energy_j": round(v, 9)}
                         for k, v in sorted(self.energy_j.items())},
        }


class Channel:
    """Shared acoustic medium: geometry, loss model, delivery scheduling."""

    def __init__(self, sim: Simulator, model, frequency_khz: float,
                 trace: Callable, cull_out_of_range: bool = False,
                 min_snr_db: float = -40.0):
        self.sim = sim
        self.model = model
        self.frequency_khz = frequency_khz
        self.trace = trace
        self.cull_out_of_range = cull_out_of_range
        self.min_snr_db = min_snr_db
        self.nodes: list["Node"] = []
        self._node_of_modem: dict[int, "Node"] = {}

    def register(self, node: "Node") -> None:
        self.nodes.append(node)
        self._node_of_modem[id(node.modem)] = node

    def max_pairwise_delay_s(self, t_s: float = 0.0) -> float:
        worst = 0.0
        positions = [n.mobility.position(t_s) for n in self.nodes]
        for i in range(len(positions)):
            for j in range(i + 1, len(positions)):
                loss = self.model.loss(positions[i], positions[j], self.frequency_khz, t_s)
                worst = max(worst, loss.delay_s)
        return worst

    def broadcast(self, tx_modem: Modem, packet: Packet, mode: ModulationMode,
                  spectrum: SpectrumAllocation, tx_time_s: float) -> None:
        now = self.sim.now
        tx_node = self._node_of_modem[id(tx_modem)]
        tx_pos = tx_node.mobility.position(now)
        for node in self.nodes:
            if node.modem is tx_modem or not node.modem.rx_enabled:
                continue
            rx_pos = node.mobility.position(now)
            loss = self.model.loss(tx_pos, rx_pos, self.frequency_khz, now)
            snr = rx_snr(loss.tl_db, tx_modem.cfg.source_level_db,
                         tx_modem.cfg.noise_level_db)
            if self.cull_out_of_range and snr < self.min_snr_db:
                continue
            attempt = RxAttempt(packet=packet, mode=mode, spectrum=spectrum,
                                start_s=now + loss.delay_s,
                                end_s=now + loss.delay_s + tx_time_s,
                                snr_db=snr)
            modem = node.modem
            self.sim.schedule(loss.delay_s, lambda m=modem, a=attempt: m.handle_rx_start(a))
            self.sim.schedule(loss.delay_s + tx_time_s,
                              lambda m=modem, a=attempt: m.handle_rx_end(a))


class Node:
    """One network node: identity, mobility, and a protocol stack."""

    def __init__(self, node_id: int, mobility, modem: Modem, mac, routing,
                 trace: Callable):
        self.id = node_id
        self.mobility = mobility
        self.modem = modem
        self.mac = mac
        self.routing = routing
        self.trace = trace
        self.delivered_uids: set[int] = set()
        self.on_deliver: Optional[Callable[["Node", Packet], None]] = None
        modem.deliver_up = mac.handle_from_phy
        if routing is not None:
            mac.deliver_up = routing.handle_from_mac

    def position(self, t_s: float):
        return self.mobility.position(t_s)

    def deliver(self, packet: Packet) -> None:
        if packet.uid in self.delivered_uids:
            return
        self.delivered_uids.add(packet.uid)
        self.trace(self.id, "deliver", packet)
        if self.on_deliver:
            self.on_deliver(self, packet)

    def send_app_packet(self, packet: Packet) -> None:
        self.trace(self.id, "enq", packet)
        self.routing.on_app_send(packet)


@dataclass
class TrafficSpec:
    source: int
    sink: int
    packet_size_bytes: int = 100
    kind: str = "cbr"  # cbr | poisson
    interval_s: float = 10.0   # cbr
    rate_pps: float = 0.1      # poisson
    start_s: float = 0.0
    stop_s: float = float("inf")


class Simulation:
    """A configured network plus its event kernel."""

    def __init__(self, seed: int = 0, max_events: int = 100_000_000,
                 trace_sink=None, fixed_headers: bool = False):
        self.sim = Simulator(seed=seed, max_events=max_events)
        self.metrics = Metrics()
        self.trace_sink = trace_sink
        self.fixed_headers = fixed_headers
        self.nodes: dict[int, Node] = {}
        self.channel: Channel | None = None
        self._uid = 0

    # -- construction -------------------------------------------------------

    def alloc_uid(self) -> int:
        self._uid += 1
        return self._uid

    def trace(self, node_id: int, event: str, packet: Packet,
              reason: str | None = None, snr_db: float | None = None) -> None:
        self.metrics.on_event(self.sim.now, event, packet, reason, node_id)
        if self.trace_sink is not None:
            record = {
                "t": round(self.sim.now, 9),
                "node": node_id,
                "ev": event,
                "uid": packet.uid,
                "kind": packet.headers[0].kind if packet.headers else "raw",
                "len": packet.wire_length(),
            }
            if reason:
                record["reason"] = reason
            if snr_db is not None:
                record["snr_db"] = round(snr_db, 3)
            self.trace_sink.write(record)

    def make_packet(self, payload_size: int, src: int, sink: int,
                    payload: dict | None = None) -> Packet:
        return Packet(self.alloc_uid(), payload_size, src, sink,
                      created_s=self.sim.now, payload=payload,
                      fixed_headers=self.fixed_headers)

    def add_traffic(self, spec: TrafficSpec) -> None:
        node = self.nodes[spec.source]
        rng = self.sim.rng(spec.source, "traffic")

        def fire() -> None:
            if self.sim.now > spec.stop_s:
                return
            packet = self.make_packet(spec.packet_size_bytes, spec.source, spec.sink)
            node.send_app_packet(packet)
            schedule_next()

        def schedule_next() -> None:
            if spec.kind == "cbr":
                gap = spec.interval_s
            else:
                gap = float(rng.exponential(1.0 / spec.rate_pps))
            if self.sim.now + gap <= spec.stop_s:
                self.sim.schedule(gap, fire)

        first = max(spec.start_s - self.sim.now, 0.0)
        if spec.kind == "poisson":
            first += float(rng.exponential(1.0 / spec.rate_pps))
        if self.sim.now + first <= spec.stop_s:
            self.sim.schedule(first, fire)

    # -- execution ------------------------------------------------------------

    def run(self, duration_s: float):
        report = self.sim.run(until_s=duration_s)
        for node_id, node in sorted(self.nodes.items()):
            node.modem.energy.finalize(self.sim.now_ns)
            self.metrics.energy_j[node_id] = node.modem.energy.energy_j
        report.metrics = self.metrics.summary(duration_s)
        if self.trace_sink is not None:
            self.trace_sink.close()
        return report

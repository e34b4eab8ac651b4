"""MAC protocols: pure Aloha and slotted FAMA.

Aloha transmits a queued packet the moment its own modem is free: no
carrier sensing, no acknowledgements.  Slotted FAMA reserves the floor
with an RTS/CTS handshake aligned to slot boundaries sized to cover the
worst-case propagation delay plus a control packet, then sends DATA and
waits for an ACK; missed control packets trigger a uniform random backoff
measured in slots.  Overhearing nodes defer for the announced remainder of
an exchange.

The geo-routing MAC from the header-size study is represented only by its
packet layouts (``goal_header_size``); its channel-access state machine is
out of scope.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from uansim.core import ConfigError, EventHandle, Simulator, seconds_to_ns
from uansim.packets import BROADCAST, Header, Packet, header_sizes
from uansim.phy import Modem


def goal_header_size(kind: str, fixed_mode: bool = False) -> int:
    """On-air header bytes for the geo-routing MAC packet kinds."""
    key = {"req": "goal_req", "rep": "goal_rep", "data": "goal_data",
           "ack": "goal_ack"}.get(kind.lower())
    if key is None:
        raise ConfigError(f"unknown goal packet kind {kind!r}")
    return header_sizes(key, fixed_mode)


class AlohaMac:
    """Unslotted immediate-send MAC; next packet goes out after tx end."""

    def __init__(self, sim: Simulator, node_id: int, modem: Modem, trace: Callable):
        self.sim = sim
        self.node_id = node_id
        self.modem = modem
        self.trace = trace
        self.queue: deque[Packet] = deque()
        self.deliver_up: Optional[Callable[[Packet], None]] = None
        modem.on_tx_end = self._on_tx_end

    def send(self, packet: Packet, next_hop: int) -> None:
        packet.push_header(Header("aloha_data", self.node_id, next_hop, packet.uid))
        self.queue.append(packet)
        self._pump()

    def _pump(self) -> None:
        # defer only while our own modem is mid-transmission; an ongoing
        # reception does not hold back a pure-Aloha sender
        if not self.queue or self.modem.transmitting:
            return
        packet = self.queue.popleft()
        self.modem.transmit(packet)

    def _on_tx_end(self) -> None:
        self._pump()

    def handle_from_phy(self, packet: Packet) -> None:
        header = packet.top_header("mac")
        if header is None or header.kind != "aloha_data":
            return
        if header.sink not in (self.node_id, BROADCAST):
            return  # overheard frame for someone else
        packet.pop_header("mac")
        if self.deliver_up:
            self.deliver_up(packet)


@dataclass
class SfamaConfig:
    slot_length_s: float
    max_backoff_slots: int = 8
    retry_limit: int = 4

    def __post_init__(self):
        if self.slot_length_s <= 0:
            raise ConfigError("slot length must be positive")
        if self.max_backoff_slots < 1 or self.retry_limit < 0:
            raise ConfigError("bad SFAMA backoff/retry configuration")


def sfama_slot_length(max_propagation_delay_s: float, control_tx_time_s: float) -> float:
    """Minimum safe slot: worst-case propagation plus one control packet."""
    return max_propagation_delay_s + control_tx_time_s


class SfamaMac:
    """Slotted FAMA state machine for one node.

    Control packets (RTS/CTS/ACK) are MAC-local packets with their own
    uids; the DATA frame wraps the routing packet.  Perfect global slot
    synchronization is assumed.
    """

    def __init__(self, sim: Simulator, node_id: int, modem: Modem, cfg: SfamaConfig,
                 trace: Callable, alloc_uid: Callable[[], int]):
        self.sim = sim
        self.node_id = node_id
        self.modem = modem
        self.cfg = cfg
        self.trace = trace
        self.alloc_uid = alloc_uid
        self.slot_ns = seconds_to_ns(cfg.slot_length_s)
        self.queue: deque[list] = deque()  # [packet, next_hop, retries]
        self.state = "idle"
        self.defer_until_ns = 0  # floor held by an overheard exchange
        self.timer: EventHandle | None = None
        self.start_handle: EventHandle | None = None
        self.peer = 0
        self.deliver_up: Optional[Callable[[Packet], None]] = None

    # -- helpers -----------------------------------------------------------

    def _next_boundary_ns(self, at_ns: int | None = None) -> int:
        now = self.sim.now_ns if at_ns is None else at_ns
        return -(-now // self.slot_ns) * self.slot_ns

    def _data_slots(self, packet: Packet) -> int:
        tx = self.modem.cfg.tx_time_s(packet.wire_length())
        return max(1, min(255, math.ceil(tx / self.cfg.slot_length_s)))

    def _set_timer(self, slots: int, action: Callable[[], None]) -> None:
        self._cancel_timer()
        self.timer = self.sim.schedule(slots * self.cfg.slot_length_s, action)

    def _cancel_timer(self) -> None:
        if self.timer is not None:
            self.timer.cancel()
            self.timer = None

    def _control_packet(self, kind: str, to: int, burst: int = 0) -> Packet:
        pkt = Packet(self.alloc_uid(), 0, self.node_id, to, created_s=self.sim.now)
        fields = {"burst_slots": burst} if kind in ("sfama_rts", "sfama_cts") else {}
        pkt.push_header(Header(kind, self.node_id, to, pkt.uid, fields))
        return pkt

    # -- sender side ---------------------------------------------------------

    def send(self, packet: Packet, next_hop: int) -> None:
        if next_hop == BROADCAST:
            raise ConfigError("slotted FAMA needs unicast next hops")
        packet.push_header(Header("sfama_data", self.node_id, next_hop, packet.uid))
        self.queue.append([packet, next_hop, 0])
        self._schedule_start()

    def _schedule_start(self) -> None:
        if self.state != "idle" or not self.queue:
            return
        if self.start_handle is not None and not self.start_handle.cancelled:
            return
        target = max(self._next_boundary_ns(), self._next_boundary_ns(self.defer_until_ns))
        self.start_handle = self.sim.schedule_at_ns(target, self._send_rts)

    def _send_rts(self) -> None:
        self.start_handle = None
        if self.state != "idle" or not self.queue:
            return
        if self.sim.now_ns < self.defer_until_ns or self.modem.busy:
            self._schedule_start_next_slot()
            return
        packet, next_hop, _ = self.queue[0]
        burst = self._data_slots(packet)
        self.peer = next_hop
        self.modem.transmit(self._control_packet("sfama_rts", next_hop, burst))
        self.state = "wait_cts"
        self._set_timer(3, self._handshake_timeout)

    def _schedule_start_next_slot(self) -> None:
        target = self._next_boundary_ns(self.sim.now_ns + 1)
        self.start_handle = self.sim.schedule_at_ns(target, self._send_rts)

    def _send_data(self) -> None:
        if self.state != "cts_received" or not self.queue:
            return
        packet, next_hop, _ = self.queue[0]
        burst = self._data_slots(packet)
        self.modem.transmit(packet.clone_for_delivery())
        self.state = "wait_ack"
        self._set_timer(burst + 3, self._handshake_timeout)

    def _handshake_timeout(self) -> None:
        self.timer = None
        entry = self.queue[0] if self.queue else None
        if entry is None:
            self.state = "idle"
            return
        entry[2] += 1
        if entry[2] > self.cfg.retry_limit:
            packet = entry[0]
            self.queue.popleft()
            self.trace(self.node_id, "mac_give_up", packet, reason="retry_limit")
            self.state = "idle"
            self._schedule_start()
            return
        backoff_slots = int(self.sim.rng(self.node_id, "sfama_backoff")
                            .integers(1, self.cfg.max_backoff_slots + 1))
        self.defer_until_ns = max(self.defer_until_ns,
                                  self._next_boundary_ns() + backoff_slots * self.slot_ns)
        self.state = "idle"
        self._schedule_start()

    # -- receiver side ---------------------------------------------------------

    def handle_from_phy(self, packet: Packet) -> None:
        header = packet.top_header("mac")
        if header is None:
            return
        kind = header.kind
        if kind == "sfama_rts":
            self._on_rts(packet, header)
        elif kind == "sfama_cts":
            self._on_cts(packet, header)
        elif kind == "sfama_data":
            self._on_data(packet, header)
        elif kind == "sfama_ack":
            self._on_ack(packet, header)

    def _defer(self, slots_after_boundary: int) -> None:
        until = self._next_boundary_ns() + slots_after_boundary * self.slot_ns
        self.defer_until_ns = max(self.defer_until_ns, until)

    def _on_rts(self, packet: Packet, header: Header) -> None:
        burst = header.fields["burst_slots"]
        if header.sink != self.node_id:
            self._defer(burst + 3)
            return
        if self.state != "idle":
            return  # busy with another exchange; sender will back off
        self.peer = header.sender
        self.state = "cts_scheduled"
        self.sim.schedule_at_ns(self._next_boundary_ns(),
                                lambda: self._send_cts(header.sender, burst))

    def _send_cts(self, to: int, burst: int) -> None:
        if self.state != "cts_scheduled":
            return
        self.modem.transmit(self._control_packet("sfama_cts", to, burst))
        self.state = "wait_data"
        self._set_timer(burst + 3, self._receiver_timeout)

    def _receiver_timeout(self) -> None:
        self.timer = None
        self.state = "idle"
        self._schedule_start()

    def _on_cts(self, packet: Packet, header: Header) -> None:
        burst = header.fields["burst_slots"]
        if header.sink != self.node_id:
            self._defer(burst + 2)
            return
        if self.state != "wait_cts" or header.sender != self.peer:
            return
        self._cancel_timer()
        self.state = "cts_received"
        self.sim.schedule_at_ns(self._next_boundary_ns(), self._send_data)

    def _on_data(self, packet: Packet, header: Header) -> None:
        if header.sink != self.node_id:
            return
        packet.pop_header("mac")
        if self.state == "wait_data" and header.sender == self.peer:
            self._cancel_timer()
            self.state = "ack_scheduled"
            self.sim.schedule_at_ns(self._next_boundary_ns(),
                                    lambda: self._send_ack(header.sender))
        if self.deliver_up:
            self.deliver_up(packet)

    def _send_ack(self, to: int) -> None:
        self.modem.transmit(self._control_packet("sfama_ack", to))
        self.state = "idle"
        self._schedule_start()

    def _on_ack(self, packet: Packet, header: Header) -> None:
        if header.sink != self.node_id or self.state != "wait_ack":
            return
        self._cancel_timer()
        if self.queue:
            self.queue.popleft()
        self.state = "idle"
        self._schedule_start()

"""Routing protocols: static next-hop tables and vector-based forwarding.

Static tables are validated at load time: for every destination, the
next-hop graph must reach the destination without cycles.  Vector-based
forwarding floods DATA packets over broadcast MAC frames; a node forwards
only if it sits inside a pipe of radius W around the source-to-sink
segment, after a holding time derived from how desirable its position is:

    alpha = p / W + (R - d cos(theta)) / R
    hold  = sqrt(alpha) * tau_max + (R - d) / v0

with p the distance from the node to the forwarder-to-sink vector, d the
node-to-forwarder distance, theta the angle at the forwarder, and R the
transmission range.  Overhearing another forwarder repeat the same packet
uid during the hold cancels the node's own forwarding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from uansim.core import ConfigError, EventHandle, Simulator
from uansim.packets import BROADCAST, Header, Packet

Vec3 = tuple[float, float, float]


def _sub(a: Sequence[float], b: Sequence[float]) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(a: Sequence[float], b: Sequence[float]) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _norm(a: Sequence[float]) -> float:
    return math.sqrt(_dot(a, a))


def point_segment_distance(p: Sequence[float], a: Sequence[float],
                           b: Sequence[float]) -> float:
    """Distance from point p to the segment a-b."""
    ab = _sub(b, a)
    denom = _dot(ab, ab)
    if denom == 0.0:
        return _norm(_sub(p, a))
    t = _dot(_sub(p, a), ab) / denom
    t = min(1.0, max(0.0, t))
    closest = (a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2])
    return _norm(_sub(p, closest))


def vbf_eligible(node_pos: Sequence[float], source_pos: Sequence[float],
                 sink_pos: Sequence[float], pipe_radius_m: float) -> bool:
    """Inside the forwarding pipe around the source-to-sink segment?"""
    return point_segment_distance(node_pos, source_pos, sink_pos) <= pipe_radius_m


@dataclass
class VbfConfig:
    pipe_radius_m: float = 100.0
    tau_max_s: float = 1.0
    # v0 normalizes the (R - d) head start; at the acoustic sound speed the
    # term exactly cancels arrival-time offsets, so holds order purely by alpha
    node_speed_mps: float = 1500.0
    transmission_range_m: float = 3000.0

    def __post_init__(self):
        if self.pipe_radius_m <= 0 or self.tau_max_s < 0:
            raise ConfigError("need pipe_radius > 0 and tau_max >= 0")
        if self.node_speed_mps <= 0 or self.transmission_range_m <= 0:
            raise ConfigError("need positive v0 and transmission range")


def vbf_desirableness(p: float, d_cos_theta: float, pipe_radius_m: float,
                      transmission_range_m: float) -> float:
    """alpha = p/W + (R - d cos(theta))/R, clamped at zero."""
    alpha = p / pipe_radius_m + (transmission_range_m - d_cos_theta) / transmission_range_m
    return max(alpha, 0.0)


def vbf_hold_from_alpha(alpha: float, d: float, cfg: VbfConfig) -> float:
    """hold = sqrt(alpha) * tau_max + (R - d)/v0, clamped at zero."""
    hold = (math.sqrt(alpha) * cfg.tau_max_s
            + (cfg.transmission_range_m - d) / cfg.node_speed_mps)
    return max(hold, 0.0)


def vbf_hold_time(node_pos: Sequence[float], forwarder_pos: Sequence[float],
                  sink_pos: Sequence[float], cfg: VbfConfig) -> float:
    """Desirableness-based holding time; the best-placed forwarder fires first."""
    to_node = _sub(node_pos, forwarder_pos)
    to_sink = _sub(sink_pos, forwarder_pos)
    d = _norm(to_node)
    sink_dist = _norm(to_sink)
    if d == 0.0 or sink_dist == 0.0:
        proj = d
        p = 0.0
    else:
        proj = _dot(to_node, to_sink) / sink_dist  # d cos(theta)
        p2 = d * d - proj * proj
        p = math.sqrt(p2) if p2 > 0 else 0.0
    alpha = vbf_desirableness(p, proj, cfg.pipe_radius_m, cfg.transmission_range_m)
    return vbf_hold_from_alpha(alpha, d, cfg)


def validate_static_routes(tables: dict[int, dict[int, int]],
                           node_ids: set[int]) -> None:
    """Every (node, destination) walk must reach the destination acyclically."""
    for node, table in tables.items():
        if node not in node_ids:
            raise ConfigError(f"route table references unknown node {node}")
        for dest, nh in table.items():
            if dest not in node_ids or nh not in node_ids:
                raise ConfigError(f"route {node}->{dest} via {nh} references unknown node")
    destinations = {d for table in tables.values() for d in table}
    for dest in destinations:
        for start in tables:
            if dest not in tables.get(start, {}):
                continue
            visited = {start}
            current = start
            while current != dest:
                nxt = tables.get(current, {}).get(dest)
                if nxt is None:
                    raise ConfigError(
                        f"route to {dest} breaks at node {current} (no entry)")
                if nxt in visited:
                    raise ConfigError(
                        f"routing loop to {dest}: {sorted(visited)} revisits {nxt}")
                visited.add(nxt)
                current = nxt


class StaticRouting:
    """Fixed next-hop forwarding from a validated table."""

    def __init__(self, sim: Simulator, node_id: int, table: dict[int, int],
                 mac, trace: Callable, deliver: Callable[[Packet], None]):
        self.sim = sim
        self.node_id = node_id
        self.table = table
        self.mac = mac
        self.trace = trace
        self.deliver = deliver

    def on_app_send(self, packet: Packet) -> None:
        packet.push_header(Header("static_data", packet.src, packet.sink, packet.uid))
        self._forward(packet)

    def _forward(self, packet: Packet) -> None:
        if packet.sink == self.node_id:
            packet.pop_header("routing")
            self.deliver(packet)
            return
        next_hop = self.table.get(packet.sink)
        if next_hop is None:
            self.trace(self.node_id, "rx_drop", packet, reason="no_route")
            return
        self.mac.send(packet, next_hop)

    def handle_from_mac(self, packet: Packet) -> None:
        self._forward(packet)


class DirectRouting:
    """Single-hop delivery: the MAC destination is the packet sink."""

    def __init__(self, sim: Simulator, node_id: int, mac, trace: Callable,
                 deliver: Callable[[Packet], None]):
        self.sim = sim
        self.node_id = node_id
        self.mac = mac
        self.trace = trace
        self.deliver = deliver

    def on_app_send(self, packet: Packet) -> None:
        packet.push_header(Header("direct_data", packet.src, packet.sink, packet.uid))
        if packet.sink == self.node_id:
            packet.pop_header("routing")
            self.deliver(packet)
            return
        self.mac.send(packet, packet.sink)

    def handle_from_mac(self, packet: Packet) -> None:
        header = packet.top_header("routing")
        if header is None:
            return
        if packet.sink in (self.node_id, BROADCAST):
            packet.pop_header("routing")
            self.deliver(packet)


class VbfRouting:
    """Vector-based forwarding over broadcast MAC frames."""

    def __init__(self, sim: Simulator, node_id: int, cfg: VbfConfig, mac,
                 trace: Callable, deliver: Callable[[Packet], None],
                 position: Callable[[float], Vec3],
                 sink_positions: dict[int, Vec3]):
        self.sim = sim
        self.node_id = node_id
        self.cfg = cfg
        self.mac = mac
        self.trace = trace
        self.deliver = deliver
        self.position = position
        self.sink_positions = sink_positions
        self.seen_until: dict[int, float] = {}  # uid -> suppression window end
        self.pending: dict[int, tuple[EventHandle, Packet]] = {}
        self.delivered: set[int] = set()

    def _remember(self, uid: int) -> None:
        window = 2.0 * self.cfg.tau_max_s + 2.0 * self.cfg.transmission_range_m / 1500.0
        self.seen_until[uid] = self.sim.now + window
        if len(self.seen_until) > 4096:
            now = self.sim.now
            self.seen_until = {u: t for u, t in self.seen_until.items() if t > now}

    def _is_seen(self, uid: int) -> bool:
        until = self.seen_until.get(uid)
        return until is not None and until > self.sim.now

    def on_app_send(self, packet: Packet) -> None:
        sink_pos = self.sink_positions.get(packet.sink)
        if sink_pos is None:
            self.trace(self.node_id, "rx_drop", packet, reason="no_route")
            return
        own = self.position(self.sim.now)
        packet.push_header(Header("vbf_data", packet.src, packet.sink, packet.uid, {
            "src_pos": own, "target_pos": sink_pos, "fwd_pos": own}))
        self._remember(packet.uid)
        self.mac.send(packet, BROADCAST)

    def handle_from_mac(self, packet: Packet) -> None:
        header = packet.top_header("routing")
        if header is None or header.kind != "vbf_data":
            return
        uid = packet.uid
        if packet.sink == self.node_id:
            if uid not in self.delivered:
                self.delivered.add(uid)
                packet.pop_header("routing")
                self.deliver(packet)
            return
        if uid in self.pending:
            # someone else repeated this packet first: suppress our copy
            handle, _ = self.pending.pop(uid)
            handle.cancel()
            self._remember(uid)
            return
        if self._is_seen(uid):
            return
        own = self.position(self.sim.now)
        src = header.fields["src_pos"]
        target = header.fields["target_pos"]
        fwd = header.fields["fwd_pos"]
        if not vbf_eligible(own, src, target, self.cfg.pipe_radius_m):
            self._remember(uid)
            return
        hold = vbf_hold_time(own, fwd, target, self.cfg)
        handle = self.sim.schedule(hold, lambda: self._forward(uid))
        self.pending[uid] = (handle, packet)

    def _forward(self, uid: int) -> None:
        entry = self.pending.pop(uid, None)
        if entry is None:
            return
        _, packet = entry
        header = packet.top_header("routing")
        own = self.position(self.sim.now)
        header.fields["fwd_pos"] = own
        self._remember(uid)
        self.mac.send(packet, BROADCAST)

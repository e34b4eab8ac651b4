import math
import random

import pytest

from conftest import records
from uansim.core import ConfigError
from uansim.packets import header_sizes
from uansim.routing import (VbfConfig, point_segment_distance, validate_static_routes,
                            vbf_desirableness, vbf_eligible, vbf_hold_from_alpha,
                            vbf_hold_time)


def segment_distance_oracle(p, a, b, samples=20001):
    # brute force: nearest of many points along the segment
    best = float("inf")
    for i in range(samples):
        t = i / (samples - 1)
        q = tuple(a[k] + t * (b[k] - a[k]) for k in range(3))
        best = min(best, math.dist(p, q))
    return best


class TestPipeGeometry:
    def test_on_axis_always_eligible(self):
        assert vbf_eligible((500, 0, 0), (0, 0, 0), (1000, 0, 0), 1.0)

    def test_twice_radius_not_eligible(self):
        assert not vbf_eligible((500, 200, 0), (0, 0, 0), (1000, 0, 0), 100.0)

    def test_matches_point_to_segment_oracle(self):
        rng = random.Random(23)
        for _ in range(200):
            a = tuple(rng.uniform(-1000, 1000) for _ in range(3))
            b = tuple(rng.uniform(-1000, 1000) for _ in range(3))
            p = tuple(rng.uniform(-1500, 1500) for _ in range(3))
            got = point_segment_distance(p, a, b)
            assert got == pytest.approx(segment_distance_oracle(p, a, b), abs=0.5)
            w = rng.uniform(10, 500)
            assert vbf_eligible(p, a, b, w) == (got <= w)

    def test_eligibility_symmetric_across_axis(self):
        source, sink = (0, 0, 0), (1000, 0, 0)
        for w in (50.0, 120.0):
            for y in (10.0, 60.0, 119.0, 200.0):
                assert vbf_eligible((400, y, 0), source, sink, w) == \
                    vbf_eligible((400, -y, 0), source, sink, w)


class TestHoldTime:
    CFG = VbfConfig(pipe_radius_m=100.0, tau_max_s=2.0, node_speed_mps=1.5,
                    transmission_range_m=3000.0)

    def test_ideal_forwarder_zero_hold(self):
        # on the vector at exactly range R: alpha = 0, hold = 0
        hold = vbf_hold_time((3000, 0, 0), (0, 0, 0), (6000, 0, 0), self.CFG)
        assert hold == 0.0

    def test_formula_values(self):
        # p = W and d cos(theta) = 0 gives alpha = 2
        alpha = vbf_desirableness(100.0, 0.0, 100.0, 3000.0)
        assert alpha == pytest.approx(2.0)
        hold = vbf_hold_from_alpha(alpha, 0.0, self.CFG)
        assert hold == pytest.approx(math.sqrt(2) * 2.0 + 3000.0 / 1.5)

    def test_alpha_clamped_at_zero(self):
        # beyond range along the vector: negative second term
        alpha = vbf_desirableness(0.0, 4000.0, 100.0, 3000.0)
        assert alpha == 0.0

    def test_better_positions_hold_less(self):
        # equal distance from the forwarder, different pipe offsets
        cfg = self.CFG
        d = math.hypot(2000.0, 90.0)
        near_axis = vbf_hold_time((math.sqrt(d * d - 100.0), 10, 0), (0, 0, 0),
                                  (6000, 0, 0), cfg)
        off_axis = vbf_hold_time((2000, 90, 0), (0, 0, 0), (6000, 0, 0), cfg)
        assert near_axis < off_axis


class TestVbfPacketKinds:
    def test_reference_sizes(self):
        assert header_sizes("vbf_interest") == 31
        assert header_sizes("vbf_ready") == 19
        assert header_sizes("vbf_data") == 43

    def test_fixed_mode(self):
        for kind in ("vbf_interest", "vbf_ready", "vbf_data"):
            assert header_sizes(kind, fixed_mode=True) == 79


class TestStaticRouting:
    def test_string_forwarding_hop_by_hop(self, traced_sim):
        n = 6
        positions = {i: ((i - 1) * 1000.0, 0, 0) for i in range(1, n + 1)}
        routes = [[i, n, i + 1] for i in range(1, n)]
        sim, sink = traced_sim(
            positions, routing="static", routing_extra={"routes": routes},
            traffic=[dict(source=1, sink=n, kind="cbr", interval_s=1000.0, stop_s=10.0)])
        report = sim.run(200.0)
        assert report.metrics["delivered"] == 1
        # every hop transmitted exactly once, in order
        tx_nodes = [r["node"] for r in records(sink, ev="tx_start", kind="static_data")]
        assert tx_nodes == [1, 2, 3, 4, 5]
        assert len(records(sink, ev="deliver", node=n)) == 1

    def test_no_route_drop(self, traced_sim):
        sim, sink = traced_sim(
            {1: (0, 0, 0), 2: (1000, 0, 0), 3: (2000, 0, 0)},
            routing="static", routing_extra={"routes": [[2, 3, 3]]},
            traffic=[dict(source=1, sink=3, kind="cbr", interval_s=1000.0, stop_s=10.0)])
        report = sim.run(100.0)
        assert report.metrics["delivered"] == 0
        assert records(sink, ev="rx_drop", node=1, reason="no_route")

    def test_delivery_at_destination_traced(self, traced_sim):
        sim, sink = traced_sim(
            {1: (0, 0, 0), 2: (1000, 0, 0)},
            routing="static", routing_extra={"routes": [[1, 2, 2]]},
            traffic=[dict(source=1, sink=2, kind="cbr", interval_s=1000.0, stop_s=10.0)])
        sim.run(100.0)
        assert len(records(sink, ev="deliver", node=2)) == 1

    def test_cycle_rejected_at_load(self):
        with pytest.raises(ConfigError, match="loop"):
            validate_static_routes({1: {9: 2}, 2: {9: 1}, 9: {}}, {1, 2, 9})

    def test_broken_chain_rejected_at_load(self):
        with pytest.raises(ConfigError, match="breaks"):
            validate_static_routes({1: {9: 2}}, {1, 2, 9})

    def test_unknown_node_rejected(self):
        with pytest.raises(ConfigError):
            validate_static_routes({1: {9: 77}}, {1, 9})

    def test_no_forwarding_cycles_in_trace(self, traced_sim):
        positions = {i: ((i - 1) * 1000.0, 0, 0) for i in range(1, 5)}
        routes = [[i, 4, i + 1] for i in range(1, 4)]
        sim, sink = traced_sim(
            positions, routing="static", routing_extra={"routes": routes},
            traffic=[dict(source=1, sink=4, kind="cbr", interval_s=40.0, stop_s=200.0)])
        sim.run(400.0)
        per_uid_nodes = {}
        for r in records(sink, ev="tx_start", kind="static_data"):
            per_uid_nodes.setdefault(r["uid"], []).append(r["node"])
        for uid, nodes in per_uid_nodes.items():
            assert len(nodes) == len(set(nodes)), f"uid {uid} revisited a node"


class TestVbfForwarding:
    TAU = 10.0
    VBF = VbfConfig(pipe_radius_m=100.0, tau_max_s=TAU, node_speed_mps=1500.0,
                    transmission_range_m=3000.0)
    DATA_TX_S = (100 + 43 + 7 + 28) * 8 / 1500.0  # payload + vbf + mac + phy headers

    def scenario(self, traced_sim, candidates):
        positions = {1: (0.0, 0.0, 0.0), 9: (4000.0, 0.0, 0.0)}
        positions.update(candidates)
        return traced_sim(
            positions, routing="vbf",
            routing_extra={"pipe_radius_m": 100.0, "tau_max_s": self.TAU,
                           "node_speed_mps": 1500.0, "transmission_range_m": 3000.0},
            traffic=[dict(source=1, sink=9, kind="cbr", interval_s=1000.0, stop_s=10.0)])

    def hold_gap_exceeds_overhear_latency(self, c2, c3):
        # suppression precondition: the later hold must start after the
        # earlier forwarder's packet has fully arrived
        h2 = vbf_hold_time(c2, (0, 0, 0), (4000, 0, 0), self.VBF)
        h3 = vbf_hold_time(c3, (0, 0, 0), (4000, 0, 0), self.VBF)
        arrive2 = math.dist((0, 0, 0), c2) / 1500.0 + h2
        arrive3 = math.dist((0, 0, 0), c3) / 1500.0 + h3
        latency = math.dist(c2, c3) / 1500.0 + self.DATA_TX_S
        return abs(arrive2 - arrive3) > latency + 0.2

    def test_single_forwarder_suppression(self, traced_sim):
        # two in-pipe candidates at equal distance from the source
        d = math.hypot(2000.0, 20.0)
        x3 = math.sqrt(d * d - 90.0 * 90.0)
        sim, sink = self.scenario(traced_sim, {2: (2000.0, 20.0, 0.0),
                                               3: (x3, -90.0, 0.0)})
        report = sim.run(3000.0)
        assert report.metrics["delivered"] == 1
        forwards = [r for r in records(sink, ev="tx_start", kind="vbf_data")
                    if r["node"] in (2, 3)]
        assert len(forwards) == 1
        assert forwards[0]["node"] == 2  # smaller alpha fires first

    def test_out_of_pipe_node_never_forwards(self, traced_sim):
        sim, sink = self.scenario(traced_sim, {2: (2000.0, 50.0, 0.0),
                                               3: (2000.0, 400.0, 0.0)})
        sim.run(3000.0)
        assert not [r for r in records(sink, ev="tx_start", kind="vbf_data")
                    if r["node"] == 3]

    def test_randomized_two_candidate_hops_single_forwarder(self, traced_sim):
        rng = random.Random(99)
        done = 0
        while done < 15:
            c2 = (rng.uniform(1500.0, 2400.0), rng.uniform(-99.0, 99.0), 0.0)
            c3 = (rng.uniform(1500.0, 2400.0), rng.uniform(-99.0, 99.0), 0.0)
            if not self.hold_gap_exceeds_overhear_latency(c2, c3):
                continue
            done += 1
            sim, sink = self.scenario(traced_sim, {2: c2, 3: c3})
            report = sim.run(4000.0)
            forwards = [r for r in records(sink, ev="tx_start", kind="vbf_data")
                        if r["node"] in (2, 3)]
            assert len(forwards) == 1, f"candidates {c2}/{c3}: {forwards}"
            assert report.metrics["delivered"] == 1

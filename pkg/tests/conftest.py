import pytest

from uansim.network import ListTraceSink, TrafficSpec
from uansim.scenario import NodeSpec, ScenarioConfig, build_simulation


def quick_config(positions, mac="aloha", routing="direct", phy=None, propagation=None,
                 spectrum=None, routing_extra=None, mac_extra=None, traffic=(),
                 seed=1, duration_s=600.0, rx_disabled=(), **scenario_kw):
    """Small programmatic scenario: positions is {node_id: (x, y, z)}."""
    cfg = ScenarioConfig(
        name="quick",
        duration_s=duration_s,
        seed=seed,
        phy=dict(phy or {}),
        spectrum=dict(spectrum or {}),
        propagation=dict(propagation or {"model": "range", "threshold_m": 3000.0}),
        mac={"protocol": mac, **(mac_extra or {})},
        routing={"protocol": routing, **(routing_extra or {})},
        **scenario_kw,
    )
    for node_id, pos in positions.items():
        cfg.nodes.append(NodeSpec(id=node_id, position=tuple(float(v) for v in pos),
                                  rx_enabled=node_id not in rx_disabled))
    for spec in traffic:
        cfg.traffic.append(spec if isinstance(spec, TrafficSpec) else TrafficSpec(**spec))
    return cfg


@pytest.fixture
def traced_sim():
    def build(positions, **kw):
        sink = ListTraceSink()
        sim = build_simulation(quick_config(positions, **kw), trace_sink=sink)
        return sim, sink
    return build


def records(sink, ev=None, node=None, kind=None, reason=None):
    out = []
    for r in sink.records:
        if ev is not None and r["ev"] != ev:
            continue
        if node is not None and r["node"] != node:
            continue
        if kind is not None and r["kind"] != kind:
            continue
        if reason is not None and r.get("reason") != reason:
            continue
        out.append(r)
    return out

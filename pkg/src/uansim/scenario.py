"""Scenario configuration: TOML loading, validation, and network assembly.

Node-level settings (position, mobility, rx capability) may vary per node;
network-level settings (routing/MAC/PHY/propagation) are single sections
and therefore uniform across the scenario.  A per-node attempt to override
a protocol section is rejected at load time.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from uansim.core import ConfigError
from uansim.mobility import (AuvMobility, StaticMobility, SteppedMobility, UgMobility,
                             WaveComponent, WaveModel, WgMobility, parse_instructions)
from uansim.network import Channel, Node, Simulation, TrafficSpec
from uansim.packets import BROADCAST
from uansim.phy import Modem, ModulationMode, PhyConfig, SpectrumAllocation
from uansim.propagation import RangeModel, TableModel, ThorpModel, load_arrival_table
from uansim.routing import (DirectRouting, StaticRouting, VbfConfig, VbfRouting,
                            validate_static_routes)
from uansim.mac import AlohaMac, SfamaConfig, SfamaMac, sfama_slot_length

_PROTOCOL_SECTIONS = ("mac", "routing", "phy", "propagation", "spectrum")


@dataclass
class NodeSpec:
    id: int
    position: tuple[float, float, float]
    mobility: dict | None = None
    rx_enabled: bool = True


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    duration_s: float = 600.0
    seed: int = 1
    max_events: int = 100_000_000
    fixed_headers: bool = False
    cull_out_of_range: bool = False
    phy: dict = dc_field(default_factory=dict)
    spectrum: dict = dc_field(default_factory=dict)
    propagation: dict = dc_field(default_factory=dict)
    mac: dict = dc_field(default_factory=dict)
    routing: dict = dc_field(default_factory=dict)
    nodes: list[NodeSpec] = dc_field(default_factory=list)
    traffic: list[TrafficSpec] = dc_field(default_factory=list)
    env: dict = dc_field(default_factory=dict)

    def node_ids(self) -> set[int]:
        return {n.id for n in self.nodes}


def bundled_scenario_path(name: str) -> Path | None:
    base = resources.files("uansim") / "scenarios" / f"{name}.toml"
    return Path(str(base)) if base.is_file() else None


def resolve_scenario(ref: str) -> Path:
    """A scenario reference is a file path or the name of a bundled scenario."""
    p = Path(ref)
    if p.is_file():
        return p
    bundled = bundled_scenario_path(ref)
    if bundled is not None:
        return bundled
    raise ConfigError(f"scenario {ref!r}: no such file or bundled scenario")


def load_scenario(ref: str | Path, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    path = resolve_scenario(str(ref))
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if overrides:
        for key, value in overrides.items():
            _apply_override(raw, key, value)
    return parse_scenario(raw, name=path.stem, base_dir=path.parent)


def _apply_override(raw: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    target = raw
    for part in parts[:-1]:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ConfigError(f"override {dotted!r}: {part} is not a section")
    target[parts[-1]] = value


def parse_scenario(raw: dict, name: str = "scenario",
                   base_dir: Path | None = None) -> ScenarioConfig:
    known = {"scenario", "phy", "spectrum", "propagation", "mac", "routing",
             "nodes", "traffic", "env"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown scenario section {key!r}")
    meta = raw.get("scenario", {})
    cfg = ScenarioConfig(
        name=meta.get("name", name),
        duration_s=float(meta.get("duration_s", 600.0)),
        seed=int(meta.get("seed", 1)),
        max_events=int(meta.get("max_events", 100_000_000)),
        fixed_headers=bool(meta.get("fixed_headers", False)),
        cull_out_of_range=bool(meta.get("cull_out_of_range", False)),
        phy=dict(raw.get("phy", {})),
        spectrum=dict(raw.get("spectrum", {})),
        propagation=dict(raw.get("propagation", {})),
        mac=dict(raw.get("mac", {})),
        routing=dict(raw.get("routing", {})),
        env=dict(raw.get("env", {})),
    )
    if base_dir is not None:
        cfg.propagation.setdefault("_base_dir", str(base_dir))
        cfg.routing.setdefault("_base_dir", str(base_dir))
    for i, node_raw in enumerate(raw.get("nodes", [])):
        for section in _PROTOCOL_SECTIONS:
            if section in node_raw:
                raise ConfigError(
                    f"nodes[{i}].{section}: network-level settings are uniform; "
                    "per-node protocol overrides are not allowed")
        if "id" not in node_raw or "position" not in node_raw:
            raise ConfigError(f"nodes[{i}]: 'id' and 'position' are required")
        node_id = int(node_raw["id"])
        if not 0 < node_id < BROADCAST:
            raise ConfigError(f"nodes[{i}].id: must be in 1..{BROADCAST - 1}")
        pos = node_raw["position"]
        if len(pos) != 3:
            raise ConfigError(f"nodes[{i}].position: needs [x, y, z]")
        cfg.nodes.append(NodeSpec(
            id=node_id,
            position=(float(pos[0]), float(pos[1]), float(pos[2])),
            mobility=node_raw.get("mobility"),
            rx_enabled=bool(node_raw.get("rx_enabled", True)),
        ))
    ids = cfg.node_ids()
    if len(ids) != len(cfg.nodes):
        raise ConfigError("duplicate node ids")
    for i, traffic_raw in enumerate(raw.get("traffic", [])):
        spec = TrafficSpec(
            source=int(traffic_raw["source"]),
            sink=int(traffic_raw["sink"]),
            packet_size_bytes=int(traffic_raw.get("packet_size_bytes", 100)),
            kind=traffic_raw.get("kind", "cbr"),
            interval_s=float(traffic_raw.get("interval_s", 10.0)),
            rate_pps=float(traffic_raw.get("rate_pps", 0.1)),
            start_s=float(traffic_raw.get("start_s", 0.0)),
            stop_s=float(traffic_raw.get("stop_s", cfg.duration_s)),
        )
        if spec.kind not in ("cbr", "poisson"):
            raise ConfigError(f"traffic[{i}].kind: must be cbr or poisson")
        if spec.source not in ids or spec.sink not in ids:
            raise ConfigError(f"traffic[{i}]: unknown source or sink node")
        cfg.traffic.append(spec)
    return cfg


def build_mobility(spec: NodeSpec):
    m = spec.mobility
    if not m:
        return StaticMobility(spec.position)
    model = m.get("model", "static")
    if model == "static":
        return StaticMobility(spec.position)
    if model == "stepped":
        return SteppedMobility(spec.position)
    if model == "ug":
        return UgMobility(
            start=spec.position,
            speed=float(m["speed"]),
            heading=m.get("heading", [1.0, 0.0]),
            depth_min=float(m["depth_min"]),
            depth_max=float(m["depth_max"]),
            opening_angle_deg=float(m["opening_angle_deg"]),
            descending=bool(m.get("descending", True)),
        )
    if model == "wg":
        wave = None
        if "wave" in m:
            wave = WaveModel([
                WaveComponent(float(c[0]), 2.0 * math.pi / float(c[1]),
                              (float(c[2]), float(c[3])),
                              float(c[4]) if len(c) > 4 else 0.0)
                for c in m["wave"]])
        return WgMobility(spec.position, float(m.get("surface_speed", 0.0)),
                          m.get("heading", [1.0, 0.0]), wave)
    if model == "auv":
        if "file" in m:
            text = Path(m["file"]).read_text(encoding="utf-8")
            source = m["file"]
        else:
            text = m.get("instructions", "")
            source = "<inline>"
        instructions = parse_instructions(text, source=source)
        return AuvMobility(spec.position, instructions,
                           initial_yaw=float(m.get("initial_yaw", 0.0)))
    raise ConfigError(f"unknown mobility model {model!r}")


def build_phy_config(cfg: ScenarioConfig) -> PhyConfig:
    phy = PhyConfig()
    p = cfg.phy
    if "mode" in p:
        phy.mode = ModulationMode.from_name(p["mode"])
    for key in ("symbol_rate", "source_level_db", "noise_level_db",
                "packet_success_threshold", "tx_power_w", "rx_power_w", "idle_power_w"):
        if key in p:
            setattr(phy, key, float(p[key]))
    if "reception_policy" in p:
        if p["reception_policy"] not in ("threshold", "ber", "ber_stochastic"):
            raise ConfigError(f"phy.reception_policy: {p['reception_policy']!r}")
        phy.reception_policy = p["reception_policy"]
    if "capture" in p:
        phy.capture = bool(p["capture"])
    if "include_phy_header" in p:
        phy.include_phy_header = bool(p["include_phy_header"])
    if "snr_thresholds" in p:
        phy.snr_thresholds = dict(phy.snr_thresholds)
        for mode_name, value in p["snr_thresholds"].items():
            ModulationMode.from_name(mode_name)
            phy.snr_thresholds[mode_name.lower()] = float(value)
    return phy


def build_spectrum(cfg: ScenarioConfig) -> SpectrumAllocation:
    s = cfg.spectrum
    return SpectrumAllocation.full_band(
        band_start_hz=float(s.get("band_start_hz", 9000.0)),
        total_bandwidth_hz=float(s.get("total_bandwidth_hz", 6000.0)),
        num_subcarriers=int(s.get("num_subcarriers", 48)),
        subcarrier_spacing_hz=float(s.get("subcarrier_spacing_hz", 125.0)),
        guard_time_s=float(s.get("guard_time_s", 0.0)),
    )


def build_propagation(cfg: ScenarioConfig):
    p = cfg.propagation
    model = p.get("model", "range")
    sound_speed = float(p.get("sound_speed_mps", 1500.0))
    if model == "range":
        return RangeModel(threshold_m=float(p.get("threshold_m", 3000.0)),
                          out_of_range_tl_db=float(p.get("out_of_range_tl_db", 170.0)),
                          sound_speed=sound_speed)
    if model == "thorp":
        return ThorpModel(spreading_k=float(p.get("spreading_k", 1.5)),
                          a0_db=float(p.get("a0_db", 0.0)),
                          sound_speed=sound_speed)
    if model == "table":
        if "file" not in p:
            raise ConfigError("propagation.file is required for the table model")
        path = Path(p["file"])
        if not path.is_absolute() and "_base_dir" in p:
            candidate = Path(p["_base_dir"]) / path
            if candidate.is_file():
                path = candidate
        return TableModel(load_arrival_table(path))
    raise ConfigError(f"unknown propagation model {model!r}")


def _static_tables(cfg: ScenarioConfig) -> dict[int, dict[int, int]]:
    r = cfg.routing
    tables: dict[int, dict[int, int]] = {}
    rows: list[tuple[int, int, int]] = []
    if "routes" in r:
        rows = [(int(a), int(b), int(c)) for a, b, c in r["routes"]]
    elif "routes_file" in r:
        path = Path(r["routes_file"])
        if not path.is_absolute() and "_base_dir" in r:
            path = Path(r["_base_dir"]) / path
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("node"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: route rows are node,destination,next_hop")
            rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
    for node, dest, nh in rows:
        tables.setdefault(node, {})[dest] = nh
    validate_static_routes(tables, cfg.node_ids())
    return tables


def build_simulation(cfg: ScenarioConfig, trace_sink=None) -> Simulation:
    simulation = Simulation(seed=cfg.seed, max_events=cfg.max_events,
                            trace_sink=trace_sink, fixed_headers=cfg.fixed_headers)
    phy_cfg = build_phy_config(cfg)
    spectrum = build_spectrum(cfg)
    model = build_propagation(cfg)
    frequency = float(cfg.propagation.get("frequency_khz",
                                          spectrum.center_frequency_khz))
    channel = Channel(simulation.sim, model, frequency, simulation.trace,
                      cull_out_of_range=cfg.cull_out_of_range)
    simulation.channel = channel

    mac_protocol = cfg.mac.get("protocol", "aloha")
    routing_protocol = cfg.routing.get("protocol", "direct")
    if mac_protocol not in ("aloha", "sfama"):
        raise ConfigError(f"mac.protocol: unknown protocol {mac_protocol!r}")
    if routing_protocol not in ("static", "vbf", "direct"):
        raise ConfigError(f"routing.protocol: unknown protocol {routing_protocol!r}")
    if routing_protocol == "vbf" and mac_protocol != "aloha":
        raise ConfigError("vbf routing needs a broadcast-capable MAC (aloha)")

    mobilities = {spec.id: build_mobility(spec) for spec in cfg.nodes}
    sink_positions = {nid: mob.position(0.0) for nid, mob in mobilities.items()}
    static_tables = _static_tables(cfg) if routing_protocol == "static" else {}

    sfama_cfg = None
    if mac_protocol == "sfama":
        # minimum slot covers worst-case propagation plus an RTS
        control_bytes = 8 + (28 if phy_cfg.include_phy_header else 0)
        min_slot = sfama_slot_length(
            _max_pairwise_delay(mobilities, model, frequency),
            phy_cfg.tx_time_s(control_bytes))
        slot = float(cfg.mac.get("slot_length_s", min_slot))
        if slot + 1e-9 < min_slot:
            raise ConfigError(
                f"mac.slot_length_s={slot} is below the safe minimum {min_slot:.3f}")
        sfama_cfg = SfamaConfig(
            slot_length_s=slot,
            max_backoff_slots=int(cfg.mac.get("max_backoff_slots", 8)),
            retry_limit=int(cfg.mac.get("retry_limit", 4)),
        )

    for spec in cfg.nodes:
        modem = Modem(simulation.sim, spec.id, phy_cfg, spectrum,
                      simulation.trace, rx_enabled=spec.rx_enabled)
        modem.channel = channel
        if mac_protocol == "aloha":
            mac = AlohaMac(simulation.sim, spec.id, modem, simulation.trace)
        else:
            mac = SfamaMac(simulation.sim, spec.id, modem, sfama_cfg,
                           simulation.trace, simulation.alloc_uid)
        node = Node(spec.id, mobilities[spec.id], modem, mac, None, simulation.trace)
        if routing_protocol == "static":
            routing = StaticRouting(simulation.sim, spec.id,
                                    static_tables.get(spec.id, {}),
                                    mac, simulation.trace, node.deliver)
        elif routing_protocol == "vbf":
            vbf_cfg = VbfConfig(
                pipe_radius_m=float(cfg.routing.get("pipe_radius_m", 100.0)),
                tau_max_s=float(cfg.routing.get("tau_max_s", 1.0)),
                node_speed_mps=float(cfg.routing.get("node_speed_mps", 1500.0)),
                transmission_range_m=float(cfg.routing.get(
                    "transmission_range_m", _default_range(model, phy_cfg, frequency))),
            )
            routing = VbfRouting(simulation.sim, spec.id, vbf_cfg, mac,
                                 simulation.trace, node.deliver,
                                 mobilities[spec.id].position, sink_positions)
        else:
            routing = DirectRouting(simulation.sim, spec.id, mac,
                                    simulation.trace, node.deliver)
        node.routing = routing
        mac.deliver_up = routing.handle_from_mac
        simulation.nodes[spec.id] = node
        channel.register(node)

    for spec in cfg.traffic:
        simulation.add_traffic(spec)
    return simulation


def _max_pairwise_delay(mobilities: dict, model, frequency: float) -> float:
    positions = [m.position(0.0) for m in mobilities.values()]
    worst = 0.0
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            worst = max(worst, model.loss(positions[i], positions[j], frequency, 0.0).delay_s)
    return worst


def _default_range(model, phy_cfg: PhyConfig, frequency_khz: float) -> float:
    """Transmission range for VBF hold times.

    Range model: the preset threshold.  Thorp: the distance where the
    received SNR meets the current mode's threshold (loss grows with
    distance, so bisection applies).  Table model: no closed form; callers
    should set routing.transmission_range_m explicitly.
    """
    if isinstance(model, RangeModel):
        return model.threshold_m
    if isinstance(model, ThorpModel):
        target_tl = (phy_cfg.source_level_db - phy_cfg.noise_level_db
                     - phy_cfg.snr_thresholds[phy_cfg.mode.key])
        origin = (0.0, 0.0, 0.0)
        lo, hi = 1.0, 500_000.0
        if model.loss(origin, (hi, 0.0, 0.0), frequency_khz).tl_db < target_tl:
            return hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if model.loss(origin, (mid, 0.0, 0.0), frequency_khz).tl_db <= target_tl:
                lo = mid
            else:
                hi = mid
        return lo
    return 3000.0


def run_scenario(cfg: ScenarioConfig, trace_sink=None):
    simulation = build_simulation(cfg, trace_sink=trace_sink)
    report = simulation.run(cfg.duration_s)
    return simulation, report

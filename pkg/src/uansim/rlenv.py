"""Step-based environment facade over a running simulation.

Agents are AUV nodes in a live network.  Each ``step`` applies one
mobility command per agent, triggers a state-exchange round over the real
acoustic stack, and advances the simulation by exactly the configured step
duration.  Observations never peek at simulator state owned by other
agents: a remote feature is whatever arrived in the latest successfully
received exchange packet, tagged with its age; if nothing has ever
arrived, the feature stays masked.  Acoustic latency and collisions are
therefore visible to the learning algorithm exactly as the network
produced them.

The bundled data-collection scenario places a grid of buffering sensor
nodes and a few agent AUVs; sensors upload a buffered packet whenever an
agent is inside collection range, and the per-step reward is packets
collected minus a distance-moved cost.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

from uansim.core import ConfigError
from uansim.packets import BROADCAST
from uansim.scenario import NodeSpec, ScenarioConfig, build_simulation

# action 0 holds position; 1..8 are compass headings (N = +y, clockwise)
ACTION_NAMES = ("hover", "n", "ne", "e", "se", "s", "sw", "w", "nw")
_SQ = math.sqrt(0.5)
ACTION_VECTORS = {
    0: (0.0, 0.0), 1: (0.0, 1.0), 2: (_SQ, _SQ), 3: (1.0, 0.0), 4: (_SQ, -_SQ),
    5: (0.0, -1.0), 6: (-_SQ, -_SQ), 7: (-1.0, 0.0), 8: (-_SQ, _SQ),
}


@dataclass
class EnvConfig:
    scenario: ScenarioConfig
    step_duration_s: float = 5.0
    episode_horizon: int = 500
    agent_ids: tuple[int, ...] = ()
    sensor_ids: tuple[int, ...] = ()
    move_speed_mps: float = 2.0
    collect_range_m: float = 400.0
    collect_poll_s: float = 1.0
    sensor_buffer_rate_pps: float = 0.02
    sensor_stop_s: float = float("inf")
    lambda_move: float = 0.001
    # request/response staggering must exceed the exchange packets' tx time
    # or every round collides; zero jitter forces simultaneous requests
    exchange_jitter_s: float = 0.6
    response_jitter_s: float = 0.6
    request_payload_bytes: int = 10
    response_payload_bytes: int = 32
    data_payload_bytes: int = 64

    def __post_init__(self):
        if self.step_duration_s <= 0:
            raise ConfigError("step duration must be positive")
        if not self.agent_ids:
            raise ConfigError("environment needs at least one agent node")
        unknown = set(self.agent_ids) - self.scenario.node_ids()
        if unknown:
            raise ConfigError(f"agent ids {sorted(unknown)} not in the scenario")


def env_config_from_scenario(cfg: ScenarioConfig) -> EnvConfig:
    """Expand the scenario's [env] section into a full environment setup.

    When a sensor grid is configured, sensor and agent nodes are appended
    to the scenario's node list programmatically.
    """
    env = dict(cfg.env)
    if not env:
        raise ConfigError("scenario has no [env] section")
    grid = env.get("grid")
    sensor_ids: list[int] = [n.id for n in cfg.nodes]
    agent_ids: list[int] = []
    if grid:
        nx, ny = int(grid.get("nx", 5)), int(grid.get("ny", 5))
        spacing = float(grid.get("spacing_m", 500.0))
        depth = float(grid.get("depth_m", 50.0))
        ox, oy = (float(v) for v in grid.get("origin", (0.0, 0.0)))
        sensor_ids = []
        for iy in range(ny):
            for ix in range(nx):
                node_id = 1 + iy * nx + ix
                sensor_ids.append(node_id)
                cfg.nodes.append(NodeSpec(
                    id=node_id, position=(ox + ix * spacing, oy + iy * spacing, depth)))
    for i, pos in enumerate(env.get("agents", [])):
        node_id = 101 + i
        agent_ids.append(node_id)
        cfg.nodes.append(NodeSpec(id=node_id,
                                  position=(float(pos[0]), float(pos[1]), float(pos[2])),
                                  mobility={"model": "stepped"}))
    known = {"grid", "agents", "step_duration_s", "episode_horizon", "move_speed_mps",
             "collect_range_m", "collect_poll_s", "sensor_buffer_rate_pps",
             "sensor_stop_s", "lambda_move", "exchange_jitter_s", "response_jitter_s",
             "request_payload_bytes", "response_payload_bytes", "data_payload_bytes"}
    for key in env:
        if key not in known:
            raise ConfigError(f"unknown env key {key!r}")
    kwargs = {k: env[k] for k in known & set(env) if k not in ("grid", "agents")}
    return EnvConfig(scenario=cfg, agent_ids=tuple(agent_ids),
                     sensor_ids=tuple(sensor_ids), **kwargs)


@dataclass
class _RemoteState:
    values: tuple = ()
    measured_s: float = -1.0
    uid: int = -1

    @property
    def known(self) -> bool:
        return self.measured_s >= 0.0


class UanEnv:
    """reset/step/observe facade; one live simulation per episode."""

    def __init__(self, cfg: EnvConfig, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.scenario.seed if seed is None else int(seed)
        self._episode = None
        self.closed = False

    # -- schema ------------------------------------------------------------

    def observation_spec(self) -> dict:
        # per-agent feature vector: own state, then each remote agent in
        # node-id order (skipping self), then the per-sensor collect counts
        agents = sorted(self.cfg.agent_ids)
        names = ["own_x", "own_y", "own_z", "own_collected"]
        for k in range(len(agents) - 1):
            names += [f"peer{k}_{f}" for f in
                      ("x", "y", "z", "collected", "age_s", "masked")]
        names += [f"sensor{i}_collected" for i in range(len(self.cfg.sensor_ids))]
        length = 4 + 6 * (len(agents) - 1) + len(self.cfg.sensor_ids)
        return {"agents": agents, "length": length, "names": names,
                "sensors": len(self.cfg.sensor_ids)}

    def action_spec(self) -> dict:
        return {"n": len(ACTION_NAMES), "names": list(ACTION_NAMES),
                "agents": sorted(self.cfg.agent_ids)}

    # -- lifecycle -----------------------------------------------------------

    def _check_open(self) -> None:
        if self.closed:
            raise ConfigError("environment is closed")

    def reset(self, seed: int | None = None) -> list[list[float]]:
        self._check_open()
        if seed is not None:
            self.seed = int(seed)
        self._episode = _Episode(self.cfg, self.seed)
        return self._episode.observe()

    def step(self, actions) -> tuple[list[list[float]], list[float], bool, dict]:
        self._check_open()
        if self._episode is None:
            raise ConfigError("call reset() before step()")
        if self._episode.done:
            raise ConfigError("episode finished; call reset()")
        return self._episode.step(actions)

    def close(self) -> None:
        self._episode = None
        self.closed = True


class _Episode:
    def __init__(self, cfg: EnvConfig, seed: int):
        self.cfg = cfg
        scenario = copy.deepcopy(cfg.scenario)
        scenario.seed = seed
        self.simulation = build_simulation(scenario)
        self.sim = self.simulation.sim
        self.agents = sorted(cfg.agent_ids)
        self.sensors = sorted(cfg.sensor_ids)
        self.done = False
        self.step_count = 0
        self.buffers = {s: 0 for s in self.sensors}
        self.collected = {a: {s: 0 for s in self.sensors} for a in self.agents}
        self.collected_total = {a: 0 for a in self.agents}
        self.step_collected = {a: 0 for a in self.agents}
        self.remote: dict[int, dict[int, _RemoteState]] = {
            a: {b: _RemoteState() for b in self.agents if b != a} for a in self.agents}
        self.exchange_log: list[dict] = []
        for node_id, node in self.simulation.nodes.items():
            node.on_deliver = self._on_deliver
        for sensor in self.sensors:
            self._schedule_buffer_arrival(sensor)
        self._schedule_poll()

    # -- plumbing ----------------------------------------------------------

    def _schedule_buffer_arrival(self, sensor: int) -> None:
        rate = self.cfg.sensor_buffer_rate_pps
        if rate <= 0:
            return
        gap = float(self.sim.rng(sensor, "sensor_buffer").exponential(1.0 / rate))
        if self.sim.now + gap > self.cfg.sensor_stop_s:
            return

        def arrive():
            self.buffers[sensor] += 1
            self._schedule_buffer_arrival(sensor)

        self.sim.schedule(gap, arrive)

    def _schedule_poll(self) -> None:
        def poll():
            now = self.sim.now
            for sensor in self.sensors:
                if self.buffers[sensor] <= 0:
                    continue
                spos = self.simulation.nodes[sensor].position(now)
                best, best_d = None, self.cfg.collect_range_m
                for agent in self.agents:
                    d = math.dist(spos, self.simulation.nodes[agent].position(now))
                    if d <= best_d:
                        best, best_d = agent, d
                if best is None:
                    continue
                self.buffers[sensor] -= 1
                packet = self.simulation.make_packet(
                    self.cfg.data_payload_bytes, sensor, best,
                    payload={"type": "data", "sensor": sensor})
                self.simulation.nodes[sensor].send_app_packet(packet)
            self._schedule_poll()

        self.sim.schedule(self.cfg.collect_poll_s, poll)

    def _on_deliver(self, node, packet) -> None:
        payload = packet.payload or {}
        kind = payload.get("type")
        if kind == "data" and node.id in self.collected:
            sensor = payload["sensor"]
            self.collected[node.id][sensor] += 1
            self.collected_total[node.id] += 1
            self.step_collected[node.id] += 1
        elif kind == "xreq" and node.id in self.collected:
            requester = payload["requester"]
            if requester == node.id:
                return
            # indexed stagger separates responders; the random tail keeps
            # successive steps from phase-locking into repeated collisions
            jitter = self.cfg.response_jitter_s
            delay = jitter * (1 + self.agents.index(node.id))
            delay += float(self.sim.rng(node.id, "exchange").uniform(0.0, jitter))
            self.sim.schedule(delay, lambda: self._send_state(node.id, requester))
        elif kind == "xresp" and node.id in self.collected:
            peer = payload["reporter"]
            state = self.remote[node.id].get(peer)
            if state is not None and payload["measured_s"] > state.measured_s:
                self.remote[node.id][peer] = _RemoteState(
                    values=tuple(payload["state"]),
                    measured_s=payload["measured_s"], uid=packet.uid)
                self.exchange_log.append({
                    "to": node.id, "from": peer, "uid": packet.uid,
                    "measured_s": payload["measured_s"], "at_s": self.sim.now})

    def _send_state(self, reporter: int, requester: int) -> None:
        now = self.sim.now
        pos = self.simulation.nodes[reporter].position(now)
        packet = self.simulation.make_packet(
            self.cfg.response_payload_bytes, reporter, requester,
            payload={"type": "xresp", "reporter": reporter, "measured_s": now,
                     "state": (pos[0], pos[1], pos[2],
                               float(self.collected_total[reporter]))})
        self.simulation.nodes[reporter].send_app_packet(packet)

    def _issue_exchange_requests(self) -> None:
        jitter = self.cfg.exchange_jitter_s
        for i, agent in enumerate(self.agents):
            delay = jitter * i
            delay += float(self.sim.rng(agent, "exchange").uniform(0.0, jitter))

            def request(agent=agent):
                packet = self.simulation.make_packet(
                    self.cfg.request_payload_bytes, agent, BROADCAST,
                    payload={"type": "xreq", "requester": agent})
                self.simulation.nodes[agent].send_app_packet(packet)

            self.sim.schedule(delay, request)

    # -- facade ------------------------------------------------------------

    def observe(self) -> list[list[float]]:
        now = self.sim.now
        out = []
        for agent in self.agents:
            pos = self.simulation.nodes[agent].position(now)
            row = [pos[0], pos[1], pos[2], float(self.collected_total[agent])]
            for other in self.agents:
                if other == agent:
                    continue
                state = self.remote[agent][other]
                if state.known:
                    row += [state.values[0], state.values[1], state.values[2],
                            state.values[3], now - state.measured_s, 0.0]
                else:
                    row += [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]  # masked: no value
            row += [float(self.collected[agent][s]) for s in self.sensors]
            out.append(row)
        return out

    def step(self, actions) -> tuple[list[list[float]], list[float], bool, dict]:
        if len(actions) != len(self.agents):
            raise ConfigError(f"need {len(self.agents)} actions, got {len(actions)}")
        moves = {}
        for agent, action in zip(self.agents, actions):
            action = int(action)
            if action not in ACTION_VECTORS:
                raise ConfigError(f"action {action} outside 0..{len(ACTION_NAMES) - 1}")
            moves[agent] = action
        now = self.sim.now
        for agent, action in moves.items():
            vx, vy = ACTION_VECTORS[action]
            speed = self.cfg.move_speed_mps
            self.simulation.nodes[agent].mobility.set_velocity(
                now, (vx * speed, vy * speed, 0.0))
            self.step_collected[agent] = 0
        self._issue_exchange_requests()
        self.step_count += 1
        target = self.step_count * self.cfg.step_duration_s
        self.sim.run(until_s=target)
        rewards = []
        for agent, action in moves.items():
            moved = 0.0 if action == 0 else self.cfg.move_speed_mps * self.cfg.step_duration_s
            rewards.append(self.step_collected[agent] - self.cfg.lambda_move * moved)
        buffers_empty = all(v == 0 for v in self.buffers.values())
        if self.step_count >= self.cfg.episode_horizon:
            self.done = True
        if self.sim.now >= self.cfg.sensor_stop_s and buffers_empty:
            self.done = True
        info = {
            "t": self.sim.now,
            "collected_total": dict(self.collected_total),
            "buffers": dict(self.buffers),
            "exchange_log": list(self.exchange_log),
        }
        return self.observe(), rewards, self.done, info


def make_env(scenario_ref, overrides=None, seed: int | None = None) -> UanEnv:
    from uansim.scenario import load_scenario

    cfg = load_scenario(scenario_ref, overrides=overrides)
    return UanEnv(env_config_from_scenario(cfg), seed=seed)


def random_actions(seed: int, steps: int, n_agents: int) -> list[list[int]]:
    """Seeded random policy shared by the CLI and remote clients."""
    import numpy as np

    from uansim.core import derive_seed_sequence

    rng = np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, ("policy",))))
    return [[int(a) for a in rng.integers(0, len(ACTION_NAMES), size=n_agents)]
            for _ in range(steps)]


def scripted_rollout(env: UanEnv, actions: list[list[int]]) -> dict:
    """Run reset + a fixed action script; the result is JSON-stable."""
    reset_obs = env.reset()
    steps = []
    for row in actions:
        obs, rewards, done, _info = env.step(row)
        steps.append({"actions": [int(a) for a in row], "obs": obs,
                      "rewards": rewards, "done": done})
        if done:
            break
    env.close()
    return {"reset": reset_obs, "steps": steps}

"""Position-over-time models for static nodes, gliders, and AUVs.

All models are pure functions of time: evaluating positions at any set of
times, in any order, gives identical results.  The channel samples them
lazily at packet send time.

* Underwater glider: zigzag gliding between two depth bounds.  The depth
  coordinate is a closed-form triangle wave, the horizontal track is a
  straight line; the split between horizontal and vertical speed comes
  from the preset opening angle.
* Wave glider: straight surface track whose depth coordinate follows a
  sum-of-sinusoids sea-surface elevation.
* AUV: piecewise trajectory read from an instruction file with straight
  ``LINE`` and circular-arc ``CURVE`` segments; the vehicle freezes at the
  endpoint after the final instruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from uansim.core import ConfigError

Position = tuple[float, float, float]


class StaticMobility:
    def __init__(self, position: Sequence[float]):
        self.pos = (float(position[0]), float(position[1]), float(position[2]))

    def position(self, t_s: float) -> Position:
        return self.pos


@dataclass(frozen=True)
class WaveComponent:
    amplitude_m: float
    angular_frequency: float  # rad/s
    wavenumber: tuple[float, float]  # rad/m
    phase: float = 0.0


class WaveModel:
    """Sea-surface elevation eta(x, y, t) = sum a_i cos(k_i . (x,y) - w_i t + phi_i)."""

    def __init__(self, components: Iterable[WaveComponent] | None = None):
        if components is None:
            # single swell: 0.5 m amplitude, 8 s period
            components = [WaveComponent(0.5, 2.0 * math.pi / 8.0, (0.0, 0.0))]
        self.components = list(components)
        if any(c.amplitude_m < 0 for c in self.components):
            raise ConfigError("wave amplitudes must be non-negative")

    def elevation(self, x: float, y: float, t_s: float) -> float:
        total = 0.0
        for c in self.components:
            total += c.amplitude_m * math.cos(
                c.wavenumber[0] * x + c.wavenumber[1] * y
                - c.angular_frequency * t_s + c.phase)
        return total

    @property
    def max_elevation(self) -> float:
        return sum(c.amplitude_m for c in self.components)


def _unit2d(heading: Sequence[float]) -> tuple[float, float]:
    hx, hy = float(heading[0]), float(heading[1])
    norm = math.hypot(hx, hy)
    if norm == 0:
        raise ConfigError("heading vector must be non-zero")
    return hx / norm, hy / norm


class UgMobility:
    """Zigzag glide: straight horizontal track, triangle-wave depth."""

    def __init__(self, start: Sequence[float], speed: float, heading: Sequence[float],
                 depth_min: float, depth_max: float, opening_angle_deg: float,
                 descending: bool = True):
        if not 0 < depth_min < depth_max:
            raise ConfigError("need 0 < depth_min < depth_max")
        if not 0 < opening_angle_deg < 180:
            raise ConfigError("opening angle must be in (0, 180) degrees")
        if speed <= 0:
            raise ConfigError("glider speed must be positive")
        if not depth_min <= start[2] <= depth_max:
            raise ConfigError(
                f"start depth {start[2]} outside glide band [{depth_min}, {depth_max}]")
        self.start = (float(start[0]), float(start[1]), float(start[2]))
        self.heading = _unit2d(heading)
        half = math.radians(opening_angle_deg / 2.0)
        self.h_speed = speed * math.cos(half)
        self.v_speed = speed * math.sin(half)
        self.depth_min = depth_min
        self.depth_max = depth_max
        self.descending = descending

    def position(self, t_s: float) -> Position:
        x = self.start[0] + self.h_speed * t_s * self.heading[0]
        y = self.start[1] + self.h_speed * t_s * self.heading[1]
        span = self.depth_max - self.depth_min
        direction = 1.0 if self.descending else -1.0
        phase = (self.start[2] - self.depth_min) + direction * self.v_speed * t_s
        folded = phase % (2.0 * span)
        z = self.depth_min + (folded if folded <= span else 2.0 * span - folded)
        return (x, y, z)


class WgMobility:
    """Surface vehicle: straight track, depth follows the wave elevation."""

    def __init__(self, start: Sequence[float], surface_speed: float,
                 heading: Sequence[float], wave: WaveModel | None = None):
        if surface_speed < 0:
            raise ConfigError("surface speed must be non-negative")
        self.start = (float(start[0]), float(start[1]), float(start[2]))
        self.surface_speed = surface_speed
        self.heading = _unit2d(heading) if surface_speed > 0 else (1.0, 0.0)
        self.wave = wave if wave is not None else WaveModel()

    def position(self, t_s: float) -> Position:
        x = self.start[0] + self.surface_speed * t_s * self.heading[0]
        y = self.start[1] + self.surface_speed * t_s * self.heading[1]
        # depth axis points down; a crest (positive elevation) is negative depth
        return (x, y, -self.wave.elevation(x, y, t_s))


@dataclass(frozen=True)
class AuvInstruction:
    mode: str  # "line" | "curve"
    duration_s: float
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)  # line
    linear_speed: float = 0.0   # curve
    angular_speed: float = 0.0  # curve, rad/s; positive turns left
    pitch: float = 0.0          # curve, rad; positive climbs (depth decreases)


def parse_instructions(text: str, source: str = "<auv>") -> list[AuvInstruction]:
    """Parse an AUV movement script: one instruction per line.

    ``LINE vx vy vz duration`` or ``CURVE speed omega pitch duration``;
    blank lines and ``#`` comments are ignored.
    """
    out: list[AuvInstruction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        keyword = parts[0].upper()
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: non-numeric field ({exc})") from None
        if keyword == "LINE":
            if len(values) != 4:
                raise ConfigError(f"{source}:{lineno}: LINE needs vx vy vz duration")
            vx, vy, vz, dur = values
            if dur <= 0:
                raise ConfigError(f"{source}:{lineno}: duration must be positive")
            out.append(AuvInstruction("line", dur, velocity=(vx, vy, vz)))
        elif keyword == "CURVE":
            if len(values) != 4:
                raise ConfigError(f"{source}:{lineno}: CURVE needs speed omega pitch duration")
            speed, omega, pitch, dur = values
            if dur <= 0:
                raise ConfigError(f"{source}:{lineno}: duration must be positive")
            if omega == 0:
                raise ConfigError(f"{source}:{lineno}: CURVE with omega=0; use LINE instead")
            out.append(AuvInstruction("curve", dur, linear_speed=speed,
                                      angular_speed=omega, pitch=pitch))
        else:
            raise ConfigError(f"{source}:{lineno}: unknown instruction {parts[0]!r}")
    return out


@dataclass
class _Segment:
    t_start: float
    t_end: float
    instr: AuvInstruction
    entry: Position
    entry_yaw: float
    exit: Position = (0.0, 0.0, 0.0)
    exit_yaw: float = 0.0


class AuvMobility:
    """Instruction-driven vehicle; stands by at the final endpoint."""

    def __init__(self, start: Sequence[float], instructions: list[AuvInstruction],
                 initial_yaw: float = 0.0):
        self.start = (float(start[0]), float(start[1]), float(start[2]))
        self.segments: list[_Segment] = []
        pos = self.start
        yaw = initial_yaw
        t = 0.0
        for instr in instructions:
            seg = _Segment(t, t + instr.duration_s, instr, pos, yaw)
            seg.exit, seg.exit_yaw = self._evaluate(seg, seg.t_end)
            self.segments.append(seg)
            pos, yaw = seg.exit, seg.exit_yaw
            t = seg.t_end
        self.final_pos = pos

    @staticmethod
    def _evaluate(seg: _Segment, t_s: float) -> tuple[Position, float]:
        tau = t_s - seg.t_start
        instr = seg.instr
        x0, y0, z0 = seg.entry
        if instr.mode == "line":
            vx, vy, vz = instr.velocity
            yaw = math.atan2(vy, vx) if (vx, vy) != (0.0, 0.0) else seg.entry_yaw
            return (x0 + vx * tau, y0 + vy * tau, z0 + vz * tau), yaw
        # circular arc of radius v/omega in the plane tilted by pitch about
        # the lateral axis; positive omega turns toward the left normal
        r = instr.linear_speed / instr.angular_speed
        phi = instr.angular_speed * tau
        cp, sp = math.cos(instr.pitch), math.sin(instr.pitch)
        cy, sy = math.cos(seg.entry_yaw), math.sin(seg.entry_yaw)
        fwd = (cy * cp, sy * cp, -sp)
        lat = (-sy, cy, 0.0)
        a = r * math.sin(phi)
        b = r * (1.0 - math.cos(phi))
        pos = (x0 + a * fwd[0] + b * lat[0],
               y0 + a * fwd[1] + b * lat[1],
               z0 + a * fwd[2] + b * lat[2])
        return pos, seg.entry_yaw + phi

    def position(self, t_s: float) -> Position:
        if t_s <= 0 or not self.segments:
            return self.start
        for seg in self.segments:
            if t_s <= seg.t_end:
                pos, _ = self._evaluate(seg, max(t_s, seg.t_start))
                return pos
        return self.final_pos


class SteppedMobility:
    """Piecewise constant-velocity track driven externally (RL agents).

    ``set_velocity`` anchors a new segment at the current position; queries
    between updates remain pure functions of time.
    """

    def __init__(self, start: Sequence[float]):
        self.anchor = (float(start[0]), float(start[1]), float(start[2]))
        self.anchor_t = 0.0
        self.velocity = (0.0, 0.0, 0.0)

    def set_velocity(self, t_s: float, velocity: Sequence[float]) -> None:
        self.anchor = self.position(t_s)
        self.anchor_t = t_s
        self.velocity = (float(velocity[0]), float(velocity[1]), float(velocity[2]))

    def position(self, t_s: float) -> Position:
        dt = t_s - self.anchor_t
        return (self.anchor[0] + self.velocity[0] * dt,
                self.anchor[1] + self.velocity[1] * dt,
                self.anchor[2] + self.velocity[2] * dt)


def trajectory_rows(model, duration_s: float, dt_s: float) -> list[tuple[float, float, float, float]]:
    """Sample a mobility model into (t, x, y, z) rows for CSV export."""
    if dt_s <= 0 or duration_s < 0:
        raise ConfigError("need dt > 0 and duration >= 0")
    rows = []
    steps = int(round(duration_s / dt_s))
    for i in range(steps + 1):
        t = i * dt_s
        x, y, z = model.position(t)
        rows.append((t, x, y, z))
    return rows

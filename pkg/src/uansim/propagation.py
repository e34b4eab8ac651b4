"""Acoustic transmission-loss models and propagation delay.

Three interchangeable models:

* range threshold -- loss is 0 dB inside a preset range and a
  source-killing constant (default 170 dB) beyond it;
* Thorp -- spreading plus the empirical four-term seawater absorption
  coefficient, ``alpha(f) = 0.11 f^2/(1+f^2) + 44 f^2/(4100+f^2)
  + 2.75e-4 f^2 + 0.003`` dB/km with f in kHz;
* arrival table -- trilinear interpolation over a precomputed
  (range, tx depth, rx depth) grid of loss/delay values, standing in for a
  ray-tracing run.

All models are immutable after construction and queries are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from uansim.core import ConfigError

DEFAULT_SOUND_SPEED = 1500.0  # m/s
DEFAULT_BLOCK_TL_DB = 170.0   # loss that kills a 170 dB source level


class CoverageError(ValueError):
    """Arrival-table query outside the table's grid hull."""


class TransmissionLoss(NamedTuple):
    tl_db: float
    delay_s: float


Position = tuple[float, float, float]


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.dist(a, b)


def propagation_delay(a: Sequence[float], b: Sequence[float],
                      sound_speed: float = DEFAULT_SOUND_SPEED) -> float:
    return distance(a, b) / sound_speed


def thorp_absorption_db_per_km(f_khz: float) -> float:
    """Thorp's seawater absorption coefficient in dB/km (f in kHz)."""
    if f_khz <= 0:
        raise ConfigError("frequency must be positive")
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


class RangeModel:
    """Distance-threshold propagation: all or nothing."""

    def __init__(self, threshold_m: float = 3000.0,
                 out_of_range_tl_db: float = DEFAULT_BLOCK_TL_DB,
                 sound_speed: float = DEFAULT_SOUND_SPEED):
        if threshold_m <= 0:
            raise ConfigError("range threshold must be positive")
        self.threshold_m = threshold_m
        self.out_of_range_tl_db = out_of_range_tl_db
        self.sound_speed = sound_speed

    def loss(self, tx_pos: Position, rx_pos: Position,
             frequency_khz: float, t_s: float = 0.0) -> TransmissionLoss:
        d = distance(tx_pos, rx_pos)
        tl = 0.0 if d <= self.threshold_m else self.out_of_range_tl_db
        return TransmissionLoss(tl, d / self.sound_speed)


class ThorpModel:
    """Spreading + Thorp absorption, computed in the dB domain.

    tl = a0 + 10 k log10(d) + (d/1000) * alpha(f); the spreading term is
    clamped at a 1 m floor so d -> 0 degrades to the constant offset.
    """

    def __init__(self, spreading_k: float = 1.5, a0_db: float = 0.0,
                 sound_speed: float = DEFAULT_SOUND_SPEED):
        self.spreading_k = spreading_k
        self.a0_db = a0_db
        self.sound_speed = sound_speed

    def loss(self, tx_pos: Position, rx_pos: Position,
             frequency_khz: float, t_s: float = 0.0) -> TransmissionLoss:
        d = distance(tx_pos, rx_pos)
        alpha = thorp_absorption_db_per_km(frequency_khz)
        spread = 10.0 * self.spreading_k * math.log10(max(d, 1.0))
        tl = self.a0_db + spread + (d / 1000.0) * alpha
        return TransmissionLoss(tl, d / self.sound_speed)


@dataclass(frozen=True)
class ArrivalTable:
    """Regular (range, tx depth, rx depth) grid of loss and delay values."""

    ranges_m: np.ndarray
    tx_depths_m: np.ndarray
    rx_depths_m: np.ndarray
    tl_db: np.ndarray      # shape (len(ranges), len(tx_depths), len(rx_depths))
    delay_s: np.ndarray
    frequency_khz: float
    label: str = ""


def load_arrival_table(path: str | Path) -> ArrivalTable:
    """Read an arrival-table CSV.

    Format: optional ``# key=value`` metadata lines (frequency_khz, label),
    a header row ``range_m,tx_depth_m,rx_depth_m,tl_db,delay_s``, then one
    row per grid point.  The cross product of the axis values must be
    complete.
    """
    meta: dict[str, str] = {}
    rows: list[tuple[float, ...]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if line.startswith("range_m"):
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ConfigError(f"arrival table row needs 5 columns: {line!r}")
            rows.append(tuple(float(p) for p in parts))
    if not rows:
        raise ConfigError(f"arrival table {path} has no data rows")
    data = np.array(rows)
    ranges = np.unique(data[:, 0])
    txd = np.unique(data[:, 1])
    rxd = np.unique(data[:, 2])
    if len(rows) != len(ranges) * len(txd) * len(rxd):
        raise ConfigError("arrival table grid is not a complete cross product")
    shape = (len(ranges), len(txd), len(rxd))
    tl = np.full(shape, np.nan)
    dl = np.full(shape, np.nan)
    ri = {v: i for i, v in enumerate(ranges)}
    ti = {v: i for i, v in enumerate(txd)}
    xi = {v: i for i, v in enumerate(rxd)}
    for r, td, xd, tl_v, dl_v in rows:
        tl[ri[r], ti[td], xi[xd]] = tl_v
        dl[ri[r], ti[td], xi[xd]] = dl_v
    if np.isnan(tl).any() or np.isnan(dl).any():
        raise ConfigError("arrival table has duplicate or missing grid points")
    return ArrivalTable(ranges, txd, rxd, tl, dl,
                        frequency_khz=float(meta.get("frequency_khz", 0.0)),
                        label=meta.get("label", ""))


def _axis_weights(axis: np.ndarray, value: float) -> tuple[int, int, float]:
    if value < axis[0] or value > axis[-1]:
        raise CoverageError(f"value {value} outside table axis [{axis[0]}, {axis[-1]}]")
    hi = int(np.searchsorted(axis, value, side="left"))
    if hi == 0:
        return 0, 0, 0.0
    lo = hi - 1
    if axis[hi] == value:
        return hi, hi, 0.0
    frac = (value - axis[lo]) / (axis[hi] - axis[lo])
    return lo, hi, float(frac)


class TableModel:
    """Arrival-table propagation; never extrapolates outside the grid."""

    FREQUENCY_TOLERANCE = 0.10

    def __init__(self, table: ArrivalTable):
        self.table = table

    def _interp(self, grid: np.ndarray, rng, txd, rxd) -> float:
        (r0, r1, fr), (t0, t1, ft), (x0, x1, fx) = rng, txd, rxd
        acc = 0.0
        for ri, wr in ((r0, 1 - fr), (r1, fr)):
            if wr == 0.0:
                continue
            for ti, wt in ((t0, 1 - ft), (t1, ft)):
                if wt == 0.0:
                    continue
                for xi, wx in ((x0, 1 - fx), (x1, fx)):
                    if wx == 0.0:
                        continue
                    acc += wr * wt * wx * float(grid[ri, ti, xi])
        return acc

    def loss(self, tx_pos: Position, rx_pos: Position,
             frequency_khz: float, t_s: float = 0.0) -> TransmissionLoss:
        tab = self.table
        if tab.frequency_khz > 0 and frequency_khz > 0:
            rel = abs(frequency_khz - tab.frequency_khz) / tab.frequency_khz
            if rel > self.FREQUENCY_TOLERANCE:
                raise CoverageError(
                    f"query frequency {frequency_khz} kHz does not match table "
                    f"frequency {tab.frequency_khz} kHz within 10%")
        horizontal = math.hypot(rx_pos[0] - tx_pos[0], rx_pos[1] - tx_pos[1])
        rng = _axis_weights(tab.ranges_m, horizontal)
        txd = _axis_weights(tab.tx_depths_m, tx_pos[2])
        rxd = _axis_weights(tab.rx_depths_m, rx_pos[2])
        return TransmissionLoss(self._interp(tab.tl_db, rng, txd, rxd),
                                self._interp(tab.delay_s, rng, txd, rxd))

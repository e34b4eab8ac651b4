"""Deterministic discrete-event kernel.

Time is kept internally as integer nanoseconds so that a simulation can
execute billions of events without floating-point drift; the public API
speaks seconds.  Events fire in (time, insertion order) order, which makes
equal-time ties reproducible and the whole trace bit-identical across runs
with the same seed.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

NS_PER_S = 1_000_000_000

#: Default cap on executed events; guards against runaway self-scheduling.
DEFAULT_MAX_EVENTS = 100_000_000


class ConfigError(ValueError):
    """Raised for invalid configuration values (negative delay, bad scenario key, ...)."""


class EventFault(RuntimeError):
    """An event action raised an exception; identifies the offending event."""

    def __init__(self, time_s: float, sequence: int, cause: BaseException):
        super().__init__(f"event #{sequence} at t={time_s:.9f}s failed: {cause!r}")
        self.time_s = time_s
        self.sequence = sequence
        self.cause = cause


def seconds_to_ns(seconds: float) -> int:
    return round(seconds * NS_PER_S)


def ns_to_seconds(t_ns: int) -> float:
    return t_ns / NS_PER_S


class EventHandle:
    """Cancellation handle for a scheduled event."""

    __slots__ = ("_entry",)

    def __init__(self, entry: list):
        self._entry = entry

    def cancel(self) -> None:
        self._entry[2] = None

    @property
    def cancelled(self) -> bool:
        return self._entry[2] is None

    @property
    def fire_time_s(self) -> float:
        return ns_to_seconds(self._entry[0])


@dataclass
class SimulationReport:
    final_time_s: float
    events_executed: int
    stop_reason: str  # "exhausted" | "time_limit" | "max_events"
    metrics: dict = field(default_factory=dict)


def derive_seed_sequence(master_seed: int, scope: tuple) -> np.random.SeedSequence:
    """Stable per-(node, purpose) seed derivation.

    Hashing the scope name means adding or removing one stream never
    perturbs the draws of any other stream.
    """
    digest = hashlib.sha256(repr(scope).encode("utf-8")).digest()
    k1 = int.from_bytes(digest[:8], "little")
    k2 = int.from_bytes(digest[8:16], "little")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(k1, k2))


class Simulator:
    """Single-threaded event loop; instances are fully independent."""

    def __init__(self, seed: int = 0, max_events: int = DEFAULT_MAX_EVENTS):
        if max_events <= 0:
            raise ConfigError("max_events must be positive")
        self.seed = int(seed)
        self.max_events = int(max_events)
        self.now_ns = 0
        self.events_executed = 0
        self._queue: list[list] = []  # entries: [t_ns, seq, action]
        self._seq = 0
        self._rngs: dict[tuple, np.random.Generator] = {}

    @property
    def now(self) -> float:
        return ns_to_seconds(self.now_ns)

    def rng(self, *scope: Any) -> np.random.Generator:
        """One random stream per (node, purpose) scope, derived from the master seed."""
        key = tuple(scope)
        gen = self._rngs.get(key)
        if gen is None:
            gen = np.random.Generator(np.random.PCG64(derive_seed_sequence(self.seed, key)))
            self._rngs[key] = gen
        return gen

    def schedule(self, delay_s: float, action: Callable[[], None]) -> EventHandle:
        if delay_s < 0:
            raise ConfigError(f"cannot schedule into the past (delay={delay_s})")
        return self.schedule_at_ns(self.now_ns + seconds_to_ns(delay_s), action)

    def schedule_at_ns(self, t_ns: int, action: Callable[[], None]) -> EventHandle:
        if t_ns < self.now_ns:
            raise ConfigError(f"cannot schedule into the past (t={t_ns} < now={self.now_ns})")
        entry = [t_ns, self._seq, action]
        self._seq += 1
        heapq.heappush(self._queue, entry)
        return EventHandle(entry)

    def run(self, until_s: float | None = None) -> SimulationReport:
        """Execute events in (fire_time, sequence) order up to `until_s`.

        With no time limit the run ends when the queue drains or the
        max-event guard trips.  The clock is advanced to `until_s` even if
        the queue empties earlier.
        """
        until_ns = None if until_s is None else seconds_to_ns(until_s)
        stop_reason = "exhausted"
        queue = self._queue
        while queue:
            if self.events_executed >= self.max_events:
                stop_reason = "max_events"
                break
            t_ns, seq, action = queue[0]
            if action is None:  # cancelled
                heapq.heappop(queue)
                continue
            if until_ns is not None and t_ns > until_ns:
                stop_reason = "time_limit"
                break
            heapq.heappop(queue)
            self.now_ns = t_ns
            self.events_executed += 1
            try:
                action()
            except Exception as exc:
                raise EventFault(ns_to_seconds(t_ns), seq, exc) from exc
        if until_ns is not None and self.now_ns < until_ns:
            self.now_ns = until_ns
        return SimulationReport(
            final_time_s=self.now,
            events_executed=self.events_executed,
            stop_reason=stop_reason,
        )

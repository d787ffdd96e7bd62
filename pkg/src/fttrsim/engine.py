"""Discrete-event engine: integer-nanosecond clock, ordered event queue,
per-node RNG substreams and a deterministic trace digest.

All simulation time is an integer count of nanoseconds since run start.
Events are totally ordered by (fire_time, insertion sequence number) so two
runs of the same scenario dispatch in exactly the same order on any platform.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

SimTime = int  # nanoseconds

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


class SimError(RuntimeError):
    """Fatal logic error inside the simulation (e.g. scheduling in the past)."""


def transmit_time_ns(nbytes: int, rate_bps: int) -> int:
    """Serialization time of `nbytes` at `rate_bps`, rounded up to whole ns."""
    bits = nbytes * 8
    return -(-bits * NS_PER_S // rate_bps)


@dataclass
class Event:
    fire_time: SimTime
    seq: int
    target: str
    kind: str
    payload: Any = None
    cancelled: bool = field(default=False, compare=False)

    def sort_key(self):
        return (self.fire_time, self.seq)


class RngStreams:
    """Per-node RNG substreams split from a single master seed.

    The substream for a node depends only on (seed, node name), so adding or
    removing a node never perturbs another node's draw sequence.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def for_node(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            material = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
            rng = random.Random(int.from_bytes(material[:8], "big"))
            self._streams[name] = rng
        return rng


class Simulator:
    """Single-threaded event loop with a horizon and a dispatch digest."""

    def __init__(self, seed: int = 0):
        self.now: SimTime = 0
        self.rng = RngStreams(seed)
        self._queue: list[tuple[tuple[int, int], Event]] = []
        self._seq = 0
        self._handlers: dict[str, Callable[[Event], None]] = {}
        self._digest = hashlib.sha256()
        self.n_scheduled = 0
        self.n_dispatched = 0
        self.n_cancelled = 0
        self.n_beyond_horizon = 0

    def register(self, target: str, handler: Callable[[Event], None]) -> None:
        self._handlers[target] = handler

    def schedule(self, fire_time: SimTime, target: str, kind: str,
                 payload: Any = None) -> Event:
        if fire_time < self.now:
            raise SimError(
                f"attempt to schedule event '{kind}' for {target} at "
                f"t={fire_time} ns while clock is at t={self.now} ns")
        ev = Event(fire_time, self._seq, target, kind, payload)
        self._seq += 1
        self.n_scheduled += 1
        heapq.heappush(self._queue, (ev.sort_key(), ev))
        return ev

    def schedule_in(self, delay: SimTime, target: str, kind: str,
                    payload: Any = None) -> Event:
        return self.schedule(self.now + delay, target, kind, payload)

    def cancel(self, ev: Event) -> None:
        if not ev.cancelled:
            ev.cancelled = True
            self.n_cancelled += 1

    def run_until(self, horizon: SimTime) -> str:
        """Dispatch every event with fire_time <= horizon; return trace digest."""
        while self._queue and self._queue[0][0][0] <= horizon:
            _, ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            if ev.fire_time < self.now:
                raise SimError("clock regression detected")
            self.now = ev.fire_time
            self._digest.update(
                f"{ev.fire_time}|{ev.target}|{ev.kind}\n".encode())
            handler = self._handlers.get(ev.target)
            if handler is None:
                raise SimError(f"no handler registered for target '{ev.target}'")
            self.n_dispatched += 1
            handler(ev)
        self.now = horizon
        self.n_beyond_horizon = sum(
            1 for _, ev in self._queue if not ev.cancelled)
        return self.trace_digest()

    def trace_digest(self) -> str:
        return self._digest.hexdigest()

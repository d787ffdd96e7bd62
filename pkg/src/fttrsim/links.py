"""Physical-medium models: the P2MP optical distribution network and the
Wi-Fi air interface (cells, overhead parameters, conflict graph).

The Wi-Fi model works at transaction granularity: one transmission occupies
the medium for preamble + payload serialization + SIFS + ACK. Interference
is binary through the conflict graph. Event-driven contention itself lives
in the simulation module; this module holds the static medium parameters
and the arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import transmit_time_ns


def _is_pow2_minus_1(v: int) -> bool:
    return v >= 0 and ((v + 1) & v) == 0


@dataclass
class WifiOverhead:
    difs_ns: int = 34_000
    sifs_ns: int = 16_000
    slot_ns: int = 9_000
    cw_min: int = 15
    cw_max: int = 1023
    preamble_ns: int = 40_000
    ack_ns: int = 28_000

    def validate(self):
        if not (_is_pow2_minus_1(self.cw_min) and _is_pow2_minus_1(self.cw_max)):
            raise ValueError("cw_min/cw_max must be powers of two minus one")
        if self.cw_min > self.cw_max:
            raise ValueError("cw_min exceeds cw_max")


@dataclass
class WifiCell:
    owner: str
    air_rate_bps: int
    overhead: WifiOverhead
    stas: tuple[str, ...] = ()

    def airtime_ns(self, payload_bytes: int) -> int:
        """Full medium occupancy of one transmission including ACK exchange."""
        oh = self.overhead
        return (oh.preamble_ns + transmit_time_ns(payload_bytes, self.air_rate_bps)
                + oh.sifs_ns + oh.ack_ns)


class InterferenceGraph:
    """Undirected, irreflexive conflict relation over cells (keyed by owner)."""

    def __init__(self, edges: list[tuple[str, str]] = ()):
        self._adj: dict[str, set[str]] = {}
        for a, b in edges:
            self.add_edge(a, b)

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            raise ValueError("conflict graph is irreflexive")
        self._adj.setdefault(a, set()).add(b)
        self._adj.setdefault(b, set()).add(a)

    def add_node(self, a: str) -> None:
        self._adj.setdefault(a, set())

    def conflicts(self, a: str, b: str) -> bool:
        return b in self._adj.get(a, ())

    def neighbors(self, a: str) -> set[str]:
        return set(self._adj.get(a, ()))

    def components(self) -> list[list[str]]:
        """Connected components, each sorted, in sorted order of first node."""
        seen: set[str] = set()
        comps = []
        for start in sorted(self._adj):
            if start in seen:
                continue
            comp = []
            stack = [start]
            while stack:
                node = stack.pop()
                if node in seen:
                    continue
                seen.add(node)
                comp.append(node)
                stack.extend(self._adj[node] - seen)
            comps.append(sorted(comp))
        return comps


@dataclass
class OpticalLink:
    downstream_bps: int
    upstream_bps: int
    prop_delay_ns: dict[str, int] = field(default_factory=dict)

    def validate(self):
        if self.downstream_bps <= 0 or self.upstream_bps <= 0:
            raise ValueError("optical rates must be positive")
        if any(d < 0 for d in self.prop_delay_ns.values()):
            raise ValueError("propagation delay must be >= 0")

    def downstream_ser_ns(self, nbytes: int) -> int:
        return transmit_time_ns(nbytes, self.downstream_bps)

    def upstream_ser_ns(self, nbytes: int) -> int:
        return transmit_time_ns(nbytes, self.upstream_bps)

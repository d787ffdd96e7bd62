"""Integrated management plane: per-device MIB stores, the MFU-resident
OMCI adapter that converts between extended and standard message forms,
and liveness/fault alarms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .frames import OmciMessage, OmciType, FrameError


class UnknownEntityError(KeyError):
    pass


class AdapterError(ValueError):
    """Routing bytes do not map to a known SFU."""


class MibStore:
    """Minimal managed-entity attribute store for one device."""

    def __init__(self, owner: str):
        self.owner = owner
        self._blobs: dict[tuple[int, int], bytes] = {}

    def set_attr(self, entity_class: int, entity_instance: int, blob: bytes) -> None:
        self._blobs[(entity_class, entity_instance)] = bytes(blob)

    def get_attr(self, entity_class: int, entity_instance: int) -> bytes:
        key = (entity_class, entity_instance)
        if key not in self._blobs:
            raise UnknownEntityError(
                f"{self.owner}: no entity ({entity_class}, {entity_instance})")
        return self._blobs[key]

    def snapshot(self) -> dict[tuple[int, int], bytes]:
        return dict(self._blobs)


class OmciAdapter:
    """Sits above the MME in the MFU; maps (mfu_port_id, sfu_id) routing
    bytes to attached SFUs and converts message forms in both directions.

    All SFUs under one MFU share a single port, so the table is injective
    by construction: one (port, sfu_id) pair per SFU.
    """

    def __init__(self, port_id: int):
        self.port_id = port_id
        self._by_route: dict[tuple[int, int], str] = {}
        self._by_node: dict[str, tuple[int, int]] = {}

    def register_sfu(self, sfu_id: int, node: str) -> None:
        key = (self.port_id, sfu_id)
        if key in self._by_route or node in self._by_node:
            raise ValueError(f"duplicate adapter mapping for {node}")
        self._by_route[key] = node
        self._by_node[node] = key

    def to_standard(self, msg: OmciMessage) -> tuple[str, OmciMessage]:
        """Downstream: strip routing bytes, return (target sfu, standard msg)."""
        if not msg.is_extended:
            raise FrameError("downstream cross-domain message must be extended")
        key = (msg.mfu_port_id, msg.sfu_id)
        node = self._by_route.get(key)
        if node is None:
            raise AdapterError(f"no SFU mapped at port/id {key}")
        std = OmciMessage(msg.transaction_id, msg.msg_type, msg.entity_class,
                          msg.entity_instance, msg.content)
        return node, std

    def to_extended(self, msg: OmciMessage, source: str) -> OmciMessage:
        """Upstream: append routing bytes identifying the true source."""
        route = self._by_node.get(source)
        if route is None:
            raise AdapterError(f"unregistered source {source}")
        if msg.is_extended:
            raise FrameError("upstream SFU message must be standard form")
        return OmciMessage(msg.transaction_id, msg.msg_type, msg.entity_class,
                           msg.entity_instance, msg.content,
                           mfu_port_id=route[0], sfu_id=route[1])

    def route_of(self, node: str) -> tuple[int, int] | None:
        return self._by_node.get(node)


def apply_omci(msg: OmciMessage, mib: MibStore) -> OmciMessage:
    """Apply a standard-form request to a MIB store; return the response."""
    if msg.msg_type == OmciType.SET:
        mib.set_attr(msg.entity_class, msg.entity_instance, msg.content)
        return OmciMessage(msg.transaction_id, OmciType.SET_RESPONSE,
                           msg.entity_class, msg.entity_instance)
    if msg.msg_type == OmciType.GET:
        try:
            blob = mib.get_attr(msg.entity_class, msg.entity_instance)
        except UnknownEntityError:
            return OmciMessage(msg.transaction_id, OmciType.ERROR_RESPONSE,
                               msg.entity_class, msg.entity_instance)
        return OmciMessage(msg.transaction_id, OmciType.GET_RESPONSE,
                           msg.entity_class, msg.entity_instance, blob)
    return OmciMessage(msg.transaction_id, OmciType.ERROR_RESPONSE,
                       msg.entity_class, msg.entity_instance)


class AlarmKind(Enum):
    LINK_DOWN = "LinkDown"
    UNRESPONSIVE = "Unresponsive"
    SLOT_VIOLATION = "SlotViolation"
    BUFFER_OVERFLOW = "BufferOverflow"


@dataclass
class Alarm:
    source: str
    kind: AlarmKind
    raised_at: int
    cleared_at: int | None = None

    def log_lines(self) -> list[str]:
        lines = [f"{self.raised_at} {self.source} {self.kind.value} raised"]
        if self.cleared_at is not None:
            lines.append(f"{self.cleared_at} {self.source} {self.kind.value} cleared")
        return lines


class LivenessMonitor:
    """Raises an Unresponsive alarm after k_miss consecutive missed polls,
    unless the SFU announced a sleep state; clears on recovery."""

    def __init__(self, k_miss: int = 2):
        if k_miss < 1:
            raise ValueError("k_miss must be >= 1")
        self.k_miss = k_miss
        self.misses: dict[str, int] = {}
        self.alarms: list[Alarm] = []
        self._active: dict[tuple[str, AlarmKind], Alarm] = {}

    def record_poll(self, sfu: str, responded: bool, announced_sleep: bool,
                    now: int) -> Alarm | None:
        if responded or announced_sleep:
            self.misses[sfu] = 0
            return self._clear(sfu, AlarmKind.UNRESPONSIVE, now)
        self.misses[sfu] = self.misses.get(sfu, 0) + 1
        if (self.misses[sfu] >= self.k_miss
                and (sfu, AlarmKind.UNRESPONSIVE) not in self._active):
            return self._raise(sfu, AlarmKind.UNRESPONSIVE, now)
        return None

    def link_event(self, sfus: list[str], down: bool, now: int) -> list[Alarm]:
        out = []
        for sfu in sfus:
            if down:
                if (sfu, AlarmKind.LINK_DOWN) not in self._active:
                    out.append(self._raise(sfu, AlarmKind.LINK_DOWN, now))
            else:
                a = self._clear(sfu, AlarmKind.LINK_DOWN, now)
                if a:
                    out.append(a)
        return out

    def raise_alarm(self, sfu: str, kind: AlarmKind, now: int) -> Alarm:
        return self._raise(sfu, kind, now)

    def _raise(self, sfu: str, kind: AlarmKind, now: int) -> Alarm:
        alarm = Alarm(sfu, kind, now)
        self.alarms.append(alarm)
        self._active[(sfu, kind)] = alarm
        return alarm

    def _clear(self, sfu: str, kind: AlarmKind, now: int) -> Alarm | None:
        alarm = self._active.pop((sfu, kind), None)
        if alarm is not None:
            alarm.cleared_at = now
        return alarm

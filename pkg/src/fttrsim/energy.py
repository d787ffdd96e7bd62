"""Power state machines, energy-saving policy selection and exact energy
accounting.

Per-node power states follow a fixed transition table; every transition is
recorded in a ledger whose intervals must tile the run exactly, which makes
the joule total a closed-form interval sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .engine import NS_PER_S


class PowerState(Enum):
    ACTIVE = "active"
    IDLE = "idle"
    LIGHT_SLEEP = "light_sleep"
    DEEP_SLEEP = "deep_sleep"
    RF_OFF = "rf_off"
    REDUCED_TX = "reduced_tx"


# state -> states reachable from it
LEGAL_TRANSITIONS: dict[PowerState, set[PowerState]] = {
    PowerState.ACTIVE: {PowerState.IDLE, PowerState.REDUCED_TX},
    PowerState.IDLE: {PowerState.ACTIVE, PowerState.LIGHT_SLEEP,
                      PowerState.RF_OFF, PowerState.REDUCED_TX},
    PowerState.LIGHT_SLEEP: {PowerState.DEEP_SLEEP, PowerState.IDLE},
    PowerState.DEEP_SLEEP: {PowerState.IDLE},
    PowerState.RF_OFF: {PowerState.IDLE, PowerState.ACTIVE},
    PowerState.REDUCED_TX: {PowerState.ACTIVE, PowerState.IDLE},
}


class IllegalTransition(RuntimeError):
    pass


class LedgerError(RuntimeError):
    """Gap or overlap in the energy ledger - fatal accounting error."""


@dataclass
class PowerProfile:
    watts: dict[PowerState, float]
    wake_light_ns: int = 10_000_000     # 10 ms
    wake_deep_ns: int = 100_000_000     # 100 ms
    t_listen_ns: int = 1_000_000_000    # deep-sleep listen interval
    listen_window_ns: int = 2_000_000

    def validate(self):
        w = self.watts
        order = [PowerState.ACTIVE, PowerState.IDLE, PowerState.REDUCED_TX,
                 PowerState.LIGHT_SLEEP, PowerState.DEEP_SLEEP]
        present = [s for s in order if s in w]
        for a, b in zip(present, present[1:]):
            if w[a] < w[b]:
                raise ValueError(f"power ordering violated: {a} < {b}")
        if any(v <= 0 for v in w.values()):
            raise ValueError("state power must be > 0 W")
        if self.wake_light_ns <= 0 or self.wake_deep_ns <= 0:
            raise ValueError("wake latencies must be > 0")


class EnergyPolicy(Enum):
    RF_OFF = "rf_off"
    TX_POWER_ADJUST = "tx_power_adjust"
    LIGHT_SLEEP = "light_sleep"
    DEEP_SLEEP = "deep_sleep"
    OPTICAL_RATE_ADAPTATION = "optical_rate_adaptation"
    GLOBAL_POLICY_SWITCHING = "global_policy_switching"


@dataclass
class ScenarioFeatures:
    load_class: str                      # idle | background | moderate | bursty
    services: frozenset = frozenset()
    user_activity: bool = False
    idle_ns: int = 0
    optical_idle: bool = False
    predicted_load: str | None = None    # scenario-provided prediction input


# Idle-duration thresholds splitting short-term from long-term idle; the
# strategy table names the conditions, the numbers are this build's defaults.
SHORT_IDLE_NS = 10 * NS_PER_S
LONG_IDLE_NS = 60 * NS_PER_S


def select_policy(features: ScenarioFeatures) -> EnergyPolicy:
    """Deterministic strategy-table mapping from scenario features.

    Resident-IoT SFUs never select a full sleep state; they fall back to
    RF channel deactivation to keep connectivity.
    """
    iot = "iot" in features.services
    low_activity = features.load_class in ("idle", "background") and not features.user_activity
    if iot and low_activity:
        return EnergyPolicy.RF_OFF
    if features.predicted_load is not None:
        return EnergyPolicy.GLOBAL_POLICY_SWITCHING
    if features.load_class == "moderate":
        return EnergyPolicy.TX_POWER_ADJUST
    if features.idle_ns >= LONG_IDLE_NS and not iot:
        return EnergyPolicy.DEEP_SLEEP
    if features.idle_ns >= SHORT_IDLE_NS and not iot:
        return EnergyPolicy.LIGHT_SLEEP
    if features.optical_idle and features.user_activity:
        return EnergyPolicy.OPTICAL_RATE_ADAPTATION
    return EnergyPolicy.LIGHT_SLEEP if not iot else EnergyPolicy.RF_OFF


class EnergyLedger:
    """Per-node (state, enter, exit) intervals; closed intervals must tile
    [0, horizon] with no gaps or overlaps."""

    def __init__(self, node: str, initial: PowerState, start: int = 0):
        self.node = node
        self.records: list[tuple[PowerState, int, int]] = []
        self._state = initial
        self._since = start

    @property
    def state(self) -> PowerState:
        return self._state

    def transition(self, new: PowerState, now: int) -> None:
        if now < self._since:
            raise LedgerError(f"{self.node}: ledger time regression")
        self.records.append((self._state, self._since, now))
        self._state = new
        self._since = now

    def close(self, horizon: int) -> None:
        self.records.append((self._state, self._since, horizon))
        self._since = horizon

    def check_tiling(self, horizon: int) -> None:
        if not self.records:
            raise LedgerError(f"{self.node}: empty ledger")
        if self.records[0][1] != 0:
            raise LedgerError(f"{self.node}: ledger does not start at 0")
        for (_, _, a_end), (_, b_start, _) in zip(self.records, self.records[1:]):
            if a_end != b_start:
                raise LedgerError(
                    f"{self.node}: ledger gap/overlap at {a_end} vs {b_start}")
        if self.records[-1][2] != horizon:
            raise LedgerError(f"{self.node}: ledger does not end at horizon")

    def joules(self, profile: PowerProfile) -> float:
        return sum((end - start) * profile.watts[state]
                   for state, start, end in self.records) / NS_PER_S

    def residency_ns(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for state, start, end in self.records:
            out[state.value] = out.get(state.value, 0) + (end - start)
        return out


class PowerMachine:
    """State machine wrapper enforcing the legal-transition table."""

    def __init__(self, node: str, initial: PowerState = PowerState.ACTIVE):
        self.node = node
        self.ledger = EnergyLedger(node, initial)
        self.rejected = 0

    @property
    def state(self) -> PowerState:
        return self.ledger.state

    def request(self, new: PowerState, now: int) -> bool:
        """Attempt a transition; illegal requests are rejected and counted."""
        if new == self.state:
            return False
        if new not in LEGAL_TRANSITIONS[self.state]:
            self.rejected += 1
            return False
        self.ledger.transition(new, now)
        return True


class SleepBuffer:
    """Holds frames for a sleeping SFU at the MFU; oldest-drop on overflow."""

    def __init__(self, capacity_frames: int):
        self.capacity = capacity_frames
        self.frames: list = []
        self.dropped = 0

    def push(self, frame) -> None:
        self.frames.append(frame)
        if len(self.frames) > self.capacity:
            self.frames.pop(0)
            self.dropped += 1

    def flush(self) -> list:
        out, self.frames = self.frames, []
        return out


def ftth_baseline_joules(activity_spans: list[tuple[int, int]], horizon: int,
                         active_w: float, idle_w: float,
                         hold_ns: int) -> float:
    """Single-gateway reference: Active during traffic activity plus a
    hold-down of hold_ns after each span (mirroring the FTTR active->idle
    timer), Idle otherwise. Spans may overlap; they are merged first."""
    spans = []
    for start, end in sorted(activity_spans):
        end = min(end + hold_ns, horizon)
        start = min(start, horizon)
        if spans and start <= spans[-1][1]:
            spans[-1] = (spans[-1][0], max(spans[-1][1], end))
        else:
            spans.append((start, end))
    active_ns = sum(end - start for start, end in spans)
    idle_ns = horizon - active_ns
    return (active_ns * active_w + idle_ns * idle_w) / NS_PER_S

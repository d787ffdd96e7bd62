"""End-to-end scenario execution: builds the node graph from a scenario
config, drives traffic, contention or grants on the air interface, the
upstream allocation calendar, the OMCI management plane and the power state
machines, and collects metrics.

Everything runs on one event loop; all randomness comes from per-node
substreams of the scenario seed, so a (scenario, seed) pair fully determines
the trace digest and every metric.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import Simulator, SimTime, transmit_time_ns, NS_PER_S
from .frames import (APDU_OVERHEAD, FEM_HEADER_LEN, classification_tag,
                     pma_wire_len, OmciMessage, OmciType, encode_omci,
                     decode_omci)
from .links import WifiCell, InterferenceGraph, OpticalLink
from .scheduling import (SchedulerMode, SfuStatusReport, AirGrant,
                         grant_downlink_airtime, check_grant_overlap,
                         phy_relay_buffer_bytes, phy_relay_slot_ns,
                         ofdma_uplink_request)
from .management import (MibStore, OmciAdapter, LivenessMonitor, AlarmKind,
                         AdapterError, apply_omci)
from .energy import (PowerMachine, PowerState, SleepBuffer, ScenarioFeatures,
                     select_policy, EnergyPolicy, ftth_baseline_joules)
from .scenario import ScenarioConfig, FlowSpec

MFU = "mfu"
OLT = "olt"


@dataclass
class Frame:
    flow: str
    dst: str
    size: int
    created_at: SimTime
    tag: int
    seq: int


@dataclass
class FlowStats:
    offered: int = 0
    delivered: int = 0
    dropped: int = 0
    latencies: list[int] = field(default_factory=list)


@dataclass
class CellStats:
    airtime_ns: int = 0
    collisions: int = 0
    coordination_failures: int = 0


@dataclass
class BurstRecord:
    sfu: str
    ready_at: int
    slot_start: int
    forwarding_delay_ns: int


@dataclass
class SimResults:
    config: ScenarioConfig
    digest: str = ""
    flow_stats: dict[str, FlowStats] = field(default_factory=dict)
    cell_stats: dict[str, CellStats] = field(default_factory=dict)
    ledgers: dict = field(default_factory=dict)          # node -> EnergyLedger
    profiles: dict = field(default_factory=dict)         # node -> PowerProfile
    grants: list[AirGrant] = field(default_factory=list)
    upstream_slots: list[tuple[str, int, int, int]] = field(default_factory=list)
    omci_sent: int = 0
    omci_delivered: int = 0
    omci_failed: int = 0
    omci_delays: list[int] = field(default_factory=list)
    olt_received: list[OmciMessage] = field(default_factory=list)
    mibs: dict[str, MibStore] = field(default_factory=dict)
    alarms: list = field(default_factory=list)
    bursts: list[BurstRecord] = field(default_factory=list)
    relay_overflow_drops: int = 0
    slot_violations: int = 0
    upstream_collisions: int = 0
    sleep_drops: int = 0
    events: list[tuple[int, str, str]] = field(default_factory=list)
    activity_spans: list[tuple[int, int]] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    ftth_joules: float = 0.0
    rejected_transitions: int = 0


class SfuSim:
    def __init__(self, name: str, cell: WifiCell, cfg: ScenarioConfig):
        self.name = name
        self.cell = cell
        self.queues: dict[int, deque[Frame]] = {}
        self.queued_bytes = 0
        self.queued_airtime_ns = 0
        self.cw = cell.overhead.cw_min
        self.power = PowerMachine(name, PowerState.ACTIVE)
        self.alive = True
        self.announced_sleep = False
        self.wake_pending = False
        self.deep_enter: int | None = None
        self.last_activity = 0
        self.window_start = 0
        self.window_bytes = 0
        self.omci_pending: deque[tuple[int, OmciMessage]] = deque()
        self.active_tx: tuple[int, int] | None = None
        self.iot = name in cfg.iot_sfus
        self.fem_seq = 0

    @property
    def asleep(self) -> bool:
        return self.power.state in (PowerState.LIGHT_SLEEP, PowerState.DEEP_SLEEP)

    def enqueue(self, frame: Frame) -> None:
        self.queues.setdefault(frame.tag, deque()).append(frame)
        self.queued_bytes += frame.size
        self.queued_airtime_ns += self.cell.airtime_ns(frame.size)

    def pop_frame(self) -> Frame | None:
        for tag in sorted(self.queues):
            q = self.queues[tag]
            if q:
                frame = q.popleft()
                self.queued_bytes -= frame.size
                self.queued_airtime_ns -= self.cell.airtime_ns(frame.size)
                return frame
        return None

    def head_frame(self) -> Frame | None:
        for tag in sorted(self.queues):
            if self.queues[tag]:
                return self.queues[tag][0]
        return None

    def top_priority(self) -> int:
        for tag in sorted(self.queues):
            if self.queues[tag]:
                return 7 - tag
        return -1


class ContentionDomain:
    """One CSMA/CA arbitration domain per conflict-graph component.

    Contenders draw a backoff slot count from their own RNG substream each
    round; the minimum wins, ties among conflicting cells collide (all tied
    transmissions overlap and fail, CW doubles up to cw_max).
    """

    def __init__(self, idx: int, members: list[str], sim: "Simulation"):
        self.idx = idx
        self.members = sorted(members)
        self.sim = sim
        self.busy_until = 0
        self.round_pending = False

    def notify(self) -> None:
        if self.round_pending:
            return
        if not any(self.sim.sfus[m].queued_bytes > 0 and self.sim.sfus[m].alive
                   and not self.sim.sfus[m].asleep for m in self.members):
            return
        self.round_pending = True
        at = max(self.sim.sim.now, self.busy_until)
        self.sim.sim.schedule(at, f"domain:{self.idx}", "round")

    def on_round(self) -> None:
        self.round_pending = False
        sim = self.sim
        now = sim.sim.now
        contenders = [m for m in self.members
                      if sim.sfus[m].queued_bytes > 0 and sim.sfus[m].alive
                      and not sim.sfus[m].asleep]
        if not contenders:
            return
        draws = {}
        for m in contenders:
            sfu = sim.sfus[m]
            draws[m] = sim.sim.rng.for_node(m).randint(0, sfu.cw)
        m_min = min(draws.values())
        winners = [m for m in contenders if draws[m] == m_min]
        oh = sim.sfus[contenders[0]].cell.overhead
        start = now + oh.difs_ns + m_min * oh.slot_ns
        if len(winners) == 1:
            w = winners[0]
            sfu = sim.sfus[w]
            frame = sfu.pop_frame()
            dur = sfu.cell.airtime_ns(frame.size)
            sim.results.cell_stats[w].airtime_ns += dur
            sfu.cw = oh.cw_min
            self.busy_until = start + dur
            sim.sim.schedule(start + dur, f"sfu:{w}", "air_delivered", frame)
        else:
            dur = 0
            for w in winners:
                sfu = sim.sfus[w]
                head = sfu.head_frame()
                dur = max(dur, sfu.cell.airtime_ns(head.size))
                sim.results.cell_stats[w].collisions += 1
                sfu.cw = min((sfu.cw + 1) * 2 - 1, oh.cw_max)
            self.busy_until = start + dur
        self.notify()


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.sim = Simulator(cfg.seed)
        self.results = SimResults(cfg)
        self.graph = InterferenceGraph()
        for s in cfg.sfus:
            self.graph.add_node(s)
        for a, b in cfg.conflicts:
            self.graph.add_edge(a, b)
        self.optical = OpticalLink(cfg.downstream_bps, cfg.upstream_bps,
                                   {s: cfg.prop_delay_ns for s in cfg.sfus})
        self.sfus: dict[str, SfuSim] = {}
        for s in cfg.sfus:
            cell = WifiCell(s, cfg.air_rate_bps, cfg.wifi_overhead)
            self.sfus[s] = SfuSim(s, cell, cfg)
            self.results.cell_stats[s] = CellStats()
            self.results.mibs[s] = MibStore(s)
        self.mfu_power = PowerMachine(MFU, PowerState.ACTIVE)
        self.mfu_last_activity = 0
        self.mfu_tx_free = 0
        self.sleep_buffers = {s: SleepBuffer(cfg.sleep_buffer_frames)
                              for s in cfg.sfus}
        self.flow_stats = {f.name: FlowStats() for f in cfg.flows}
        self.results.flow_stats = self.flow_stats
        self.flow_specs = {f.name: f for f in cfg.flows}
        self.flow_next_end: dict[str, int] = {}
        self.monitor = LivenessMonitor(cfg.k_miss)
        self.adapter = OmciAdapter(port_id=1)
        for i, s in enumerate(cfg.sfus):
            self.adapter.register_sfu(i + 1, s)
        self.sfu_index = {s: i + 1 for i, s in enumerate(cfg.sfus)}
        self.olt_queue: deque[bytes] = deque()
        self.upstream_next_free = 0
        self.relay_buffer_level = 0
        self.mfu_sleep_view: dict[str, str] = {}
        self.deep_cmd_issued = False
        contended = cfg.mode == SchedulerMode.DISTRIBUTED_BASELINE
        self.domains: list[ContentionDomain] = []
        self.domain_of: dict[str, ContentionDomain] = {}
        if contended:
            comps = self.graph.components()
            for i, comp in enumerate(comps):
                dom = ContentionDomain(i, comp, self)
                self.domains.append(dom)
                self.domain_of.update({m: dom for m in comp})
                self.sim.register(f"domain:{i}", self._on_domain)
        self.sim.register(MFU, self._on_mfu)
        self.sim.register(OLT, self._on_olt)
        for s in cfg.sfus:
            self.sim.register(f"sfu:{s}", self._on_sfu)

    # ------------------------------------------------------------------
    # setup

    def _prime(self) -> None:
        cfg = self.cfg
        for flow in cfg.flows:
            start = int(flow.start_ms * 1_000_000)
            if flow.model == "batch":
                interval = int(flow.interval_us * 1000)
                for k in range(flow.count):
                    t = start + k * interval
                    if t <= cfg.horizon_ns:
                        self.sim.schedule(t, MFU, "flow_arrival", flow.name)
            else:
                self.sim.schedule(start, MFU, "flow_arrival", flow.name)
                if flow.model == "on_off":
                    self.flow_next_end[flow.name] = start + int(flow.on_ms * 1_000_000)
        if cfg.mode != SchedulerMode.DISTRIBUTED_BASELINE and cfg.flows:
            self.sim.schedule(0, MFU, "status_cycle")
        if cfg.uplink_bursts or cfg.storm:
            self.sim.schedule(0, MFU, "alloc_cycle")
        self.sim.schedule(0, MFU, "poll_cycle")
        for burst in cfg.uplink_bursts:
            t = int(burst.start_ms * 1_000_000)
            self.sim.schedule(t, f"sfu:{burst.sfu}", "burst_start", burst)
        if cfg.storm:
            self._prime_storm()
        if cfg.kill:
            at = int(cfg.kill.at_ms * 1_000_000)
            self.sim.schedule(at, f"sfu:{cfg.kill.sfu}", "kill")
            if cfg.kill.recover_ms is not None:
                self.sim.schedule(int(cfg.kill.recover_ms * 1_000_000),
                                  f"sfu:{cfg.kill.sfu}", "recover")
        for s in cfg.sfus:
            self._schedule_power_check(s)
        self._schedule_power_check(MFU)

    def _prime_storm(self) -> None:
        cfg = self.cfg
        rng = self.sim.rng.for_node(OLT)
        for i in range(cfg.storm.count):
            target = cfg.storm.targets[i % len(cfg.storm.targets)]
            port, sfu_id = self.adapter.route_of(target)
            content = bytes(rng.randrange(256) for _ in range(cfg.storm.content_bytes))
            msg = OmciMessage(transaction_id=i & 0xFFFF, msg_type=OmciType.SET,
                              entity_class=cfg.storm.entity_class,
                              entity_instance=i % 64, content=content,
                              mfu_port_id=port, sfu_id=sfu_id)
            self.olt_queue.append(encode_omci(msg))
            self.results.omci_sent += 1

    # ------------------------------------------------------------------
    # traffic

    def _flow_arrival(self, name: str) -> None:
        flow = self.flow_specs[name]
        now = self.sim.now
        stats = self.flow_stats[name]
        stats.offered += 1
        sfu = self.sfus[flow.dst]
        frame = Frame(name, flow.dst, flow.size_bytes, now,
                      classification_tag(flow.priority), sfu.fem_seq)
        sfu.fem_seq += 1
        self._mark_mfu_activity(now)
        if sfu.asleep or sfu.wake_pending:
            buf = self.sleep_buffers[flow.dst]
            before = buf.dropped
            buf.push(frame)
            if buf.dropped > before:
                stats.dropped += buf.dropped - before
                self.results.sleep_drops += buf.dropped - before
            self._trigger_wake(flow.dst)
        else:
            self._optical_downstream(frame)
        self._schedule_next_arrival(flow)

    def _schedule_next_arrival(self, flow: FlowSpec) -> None:
        if flow.model == "batch":
            return
        now = self.sim.now
        stop = (int(flow.stop_ms * 1_000_000) if flow.stop_ms is not None
                else self.cfg.horizon_ns)
        interarrival = transmit_time_ns(flow.size_bytes,
                                        int(flow.rate_mbps * 1_000_000))
        nxt = now + interarrival
        if flow.model == "on_off":
            on_ns = int(flow.on_ms * 1_000_000)
            off_ns = int(flow.off_ms * 1_000_000)
            end = self.flow_next_end[flow.name]
            if nxt >= end:  # jump over the off period to the next on period
                nxt = end + off_ns
                self.flow_next_end[flow.name] = nxt + on_ns
        if nxt <= min(stop, self.cfg.horizon_ns):
            self.sim.schedule(nxt, MFU, "flow_arrival", flow.name)

    def _wire_bytes(self, frame_size: int) -> int:
        dll = APDU_OVERHEAD + frame_size + FEM_HEADER_LEN
        return pma_wire_len(dll)

    def _optical_downstream(self, frame: Frame) -> None:
        now = self.sim.now
        wire = self._wire_bytes(frame.size)
        depart = max(now, self.mfu_tx_free)
        ser = self.optical.downstream_ser_ns(wire)
        self.mfu_tx_free = depart + ser
        arrive = depart + ser + self.optical.prop_delay_ns[frame.dst]
        self.sim.schedule(arrive, f"sfu:{frame.dst}", "optical_rx", frame)

    def _on_optical_rx(self, sfu: SfuSim, frame: Frame) -> None:
        now = self.sim.now
        self._mark_sfu_activity(sfu, now, frame.size)
        sfu.enqueue(frame)
        if self.cfg.mode == SchedulerMode.DISTRIBUTED_BASELINE:
            self.domain_of[sfu.name].notify()

    def _deliver(self, frame: Frame) -> None:
        """Frame handed to its STA over the air; record end-to-end latency."""
        now = self.sim.now
        stats = self.flow_stats[frame.flow]
        stats.delivered += 1
        latency = (now - frame.created_at
                   + self.cfg.proc_mfu_ns + self.cfg.proc_sfu_ns)
        stats.latencies.append(latency)
        self.results.activity_spans.append((frame.created_at, now))

    # ------------------------------------------------------------------
    # centralized scheduling

    def _status_cycle(self) -> None:
        cfg = self.cfg
        now = self.sim.now
        reports = []
        for name in cfg.sfus:
            sfu = self.sfus[name]
            if not sfu.alive or sfu.asleep:
                continue
            reports.append(SfuStatusReport(
                sfu=name, buffered_bytes=sfu.queued_bytes,
                top_priority=sfu.top_priority(), active_users=len(sfu.cell.stas),
                timestamp=now))
        t0 = now + cfg.control_delay_ns

        def airtime_for(report: SfuStatusReport) -> int:
            return self.sfus[report.sfu].queued_airtime_ns

        grants = grant_downlink_airtime(reports, self.graph, cfg.txop_max_ns,
                                        t0, airtime_for,
                                        window_end=t0 + cfg.status_cycle_ns)
        overlaps = check_grant_overlap(grants, self.graph)
        if overlaps:
            raise RuntimeError(
                f"scheduler emitted overlapping grants: {overlaps}")
        for g in grants:
            self.results.grants.append(g)
            self.sim.schedule(g.start, f"sfu:{g.sfu}", "grant_start", g)
        nxt = now + cfg.status_cycle_ns
        if nxt <= cfg.horizon_ns:
            self.sim.schedule(nxt, MFU, "status_cycle")

    def _grant_start(self, sfu: SfuSim, grant: AirGrant) -> None:
        now = self.sim.now
        if not sfu.alive or sfu.asleep:
            return
        end = grant.start + grant.max_duration
        # coordination-failure check against conflicting in-flight transmissions
        for other in self.graph.neighbors(sfu.name):
            tx = self.sfus[other].active_tx
            if tx and tx[0] < end and now < tx[1]:
                self.results.cell_stats[sfu.name].coordination_failures += 1
        cursor = now
        last_end = now
        while True:
            head = sfu.head_frame()
            if head is None:
                break
            dur = sfu.cell.airtime_ns(head.size)
            if cursor + dur > end:
                break
            frame = sfu.pop_frame()
            cursor += dur
            self.sim.schedule(cursor, f"sfu:{sfu.name}", "air_delivered", frame)
            self.results.cell_stats[sfu.name].airtime_ns += dur
            last_end = cursor
        sfu.active_tx = (now, last_end)

    # ------------------------------------------------------------------
    # upstream allocation calendar (alloc cycles, OMCI slot, data slots)

    def _cycle_start(self, k: int) -> int:
        return k * self.cfg.alloc_cycle_ns

    def _omci_window_end(self, cycle_start: int) -> int:
        return cycle_start + self.cfg.omci_slot_ns + self.cfg.guard_ns

    def _reserve_data_slot(self, earliest: int, duration: int, sfu: str,
                           tcont: int) -> int:
        """Place a data burst on the upstream calendar, skipping the reserved
        OMCI window at the head of every allocation cycle."""
        cfg = self.cfg
        start = max(earliest, self.upstream_next_free)
        while True:
            k = start // cfg.alloc_cycle_ns
            win_start = self._cycle_start(k)
            win_end = self._omci_window_end(win_start)
            nxt_win_start = self._cycle_start(k + 1)
            if start < win_end:
                start = win_end
                continue
            if start + duration > nxt_win_start:
                start = self._omci_window_end(nxt_win_start)
                continue
            break
        self.upstream_next_free = start + duration + cfg.guard_ns
        self.results.upstream_slots.append((sfu, start, duration, tcont))
        return start

    def _alloc_cycle(self) -> None:
        cfg = self.cfg
        now = self.sim.now
        k = now // cfg.alloc_cycle_ns
        self.results.upstream_slots.append(
            ("omci", self._cycle_start(k), cfg.omci_slot_ns, 1))
        # downstream OMCI pacing: one message per allocation cycle
        if self.olt_queue:
            data = self.olt_queue.popleft()
            self._omci_downstream(data)
        # upstream OMCI: the SFU holding the oldest pending response owns
        # this cycle's dedicated slot
        oldest_sfu, oldest_t = None, None
        for name in cfg.sfus:
            pend = self.sfus[name].omci_pending
            if pend and (oldest_t is None or pend[0][0] < oldest_t):
                oldest_sfu, oldest_t = name, pend[0][0]
        if oldest_sfu is not None:
            created, msg = self.sfus[oldest_sfu].omci_pending.popleft()
            arrive_mfu = self._cycle_start(k) + cfg.omci_slot_ns
            ext = self.adapter.to_extended(msg, oldest_sfu)
            self.sim.schedule(arrive_mfu + cfg.olt_pipe_ns, OLT, "omci_rx",
                              (created, encode_omci(ext)))
        nxt = now + cfg.alloc_cycle_ns
        if nxt <= cfg.horizon_ns:
            self.sim.schedule(nxt, MFU, "alloc_cycle")

    def _omci_downstream(self, data: bytes) -> None:
        now = self.sim.now
        try:
            msg = decode_omci(data)
            target, std = self.adapter.to_standard(msg)
        except AdapterError:
            self.results.omci_failed += 1
            err = OmciMessage(0, OmciType.ERROR_RESPONSE, 0, 0)
            self.sim.schedule(now + self.cfg.olt_pipe_ns, OLT, "omci_rx",
                              (now, encode_omci(err)))
            return
        self.sim.schedule(now + self.cfg.control_delay_ns,
                          f"sfu:{target}", "omci_rx", encode_omci(std))

    def _sfu_omci_rx(self, sfu: SfuSim, data: bytes) -> None:
        now = self.sim.now
        msg = decode_omci(data)
        response = apply_omci(msg, self.results.mibs[sfu.name])
        sfu.omci_pending.append((now, response))

    def _olt_rx(self, payload) -> None:
        created, data = payload
        msg = decode_omci(data)
        self.results.olt_received.append(msg)
        self.results.omci_delivered += 1
        self.results.omci_delays.append(self.sim.now - created)

    # ------------------------------------------------------------------
    # OFDMA uplink bursts

    def _burst_start(self, sfu: SfuSim, spec) -> None:
        cfg = self.cfg
        now = self.sim.now
        air_ns = int(spec.air_duration_us * 1000)
        ready = now + air_ns
        if cfg.mode == SchedulerMode.PHY_RELAY:
            nbytes = phy_relay_buffer_bytes(air_ns, cfg.sample_rate_sps,
                                            cfg.bit_width)
        else:
            req = ofdma_uplink_request(sfu.name, spec.rus, cfg.per_sta_overhead)
            nbytes = req.bytes_expected if req else 0
        if nbytes > 0:
            if cfg.mode == SchedulerMode.PHY_RELAY:
                self.relay_buffer_level += nbytes
                if self.relay_buffer_level > cfg.relay_buffer_bytes:
                    self.results.relay_overflow_drops += 1
                    self.relay_buffer_level = cfg.relay_buffer_bytes
            duration = phy_relay_slot_ns(nbytes, cfg.upstream_bps)
            if spec.coordinated:
                # bandwidth pre-request sent at trigger time, before the air
                # reception completes; slot can start the moment data is ready
                earliest = max(ready, now + cfg.control_delay_ns)
            else:
                request_at = ready + cfg.control_delay_ns
                earliest = self._cycle_start(request_at // cfg.alloc_cycle_ns + 1)
            start = self._reserve_data_slot(earliest, duration, sfu.name, 2)
            delay = start - ready
            self.results.bursts.append(BurstRecord(sfu.name, ready, start, delay))
            self.sim.schedule(start + duration, MFU, "upstream_burst_done",
                              (sfu.name, nbytes))
        nxt = now + int(spec.period_us * 1000)
        if nxt <= cfg.horizon_ns:
            self.sim.schedule(nxt, f"sfu:{sfu.name}", "burst_start", spec)

    def _upstream_burst_done(self, payload) -> None:
        sfu, nbytes = payload
        if self.cfg.mode == SchedulerMode.PHY_RELAY:
            self.relay_buffer_level = max(0, self.relay_buffer_level - nbytes)
        self._mark_mfu_activity(self.sim.now)

    # ------------------------------------------------------------------
    # power / sleep

    def _mark_mfu_activity(self, now: int) -> None:
        self.mfu_last_activity = now
        if self.mfu_power.state == PowerState.IDLE:
            self.mfu_power.request(PowerState.ACTIVE, now)

    def _mark_sfu_activity(self, sfu: SfuSim, now: int, nbytes: int) -> None:
        sfu.last_activity = now
        sfu.window_bytes += nbytes
        if sfu.power.state in (PowerState.IDLE, PowerState.RF_OFF):
            sfu.power.request(PowerState.ACTIVE, now)
        elif sfu.power.state == PowerState.REDUCED_TX:
            sfu.power.request(PowerState.ACTIVE, now)

    def _schedule_power_check(self, node: str) -> None:
        target = MFU if node == MFU else f"sfu:{node}"
        self.sim.schedule(self.sim.now + self.cfg.t_act_idle_ns, target,
                          "power_check", node)

    def _power_check(self, node: str) -> None:
        now = self.sim.now
        cfg = self.cfg
        if node == MFU:
            machine, last = self.mfu_power, self.mfu_last_activity
        else:
            sfu = self.sfus[node]
            machine, last = sfu.power, sfu.last_activity
        if machine.state == PowerState.ACTIVE:
            if now - last >= cfg.t_act_idle_ns:
                machine.request(PowerState.IDLE, now)
                if node != MFU and cfg.savings_enabled:
                    self.sim.schedule(now + cfg.t_idle_sleep_ns,
                                      f"sfu:{node}", "sleep_check", node)
                self.sim.schedule(now + cfg.t_act_idle_ns,
                                  MFU if node == MFU else f"sfu:{node}",
                                  "power_check", node)
            else:
                self.sim.schedule(last + cfg.t_act_idle_ns,
                                  MFU if node == MFU else f"sfu:{node}",
                                  "power_check", node)
        else:
            self.sim.schedule(now + cfg.t_act_idle_ns,
                              MFU if node == MFU else f"sfu:{node}",
                              "power_check", node)

    def _features(self, sfu: SfuSim, now: int) -> ScenarioFeatures:
        window = max(now - sfu.window_start, 1)
        bps = sfu.window_bytes * 8 * NS_PER_S // window
        idle_ns = now - sfu.last_activity
        if idle_ns >= self.cfg.t_act_idle_ns:
            load = "idle"
        elif bps < 1_000_000:
            load = "background"
        elif bps < 50_000_000:
            load = "moderate"
        else:
            load = "bursty"
        sfu.window_start = now
        sfu.window_bytes = 0
        return ScenarioFeatures(
            load_class=load,
            services=frozenset({"iot"}) if sfu.iot else frozenset(),
            user_activity=idle_ns < self.cfg.t_act_idle_ns,
            idle_ns=idle_ns)

    def _sleep_check(self, node: str) -> None:
        sfu = self.sfus[node]
        now = self.sim.now
        cfg = self.cfg
        if not sfu.alive or sfu.power.state != PowerState.IDLE:
            return
        if now - sfu.last_activity < cfg.t_act_idle_ns + cfg.t_idle_sleep_ns:
            self.sim.schedule(sfu.last_activity + cfg.t_act_idle_ns
                              + cfg.t_idle_sleep_ns, f"sfu:{node}",
                              "sleep_check", node)
            return
        policy = select_policy(self._features(sfu, now))
        if policy in (EnergyPolicy.LIGHT_SLEEP, EnergyPolicy.DEEP_SLEEP):
            if sfu.power.request(PowerState.LIGHT_SLEEP, now):
                sfu.announced_sleep = True
                self.results.events.append((now, "light_sleep_report", node))
                self.mfu_sleep_view[node] = "light"
                self._maybe_deep_sleep(now)
        elif policy == EnergyPolicy.RF_OFF:
            sfu.power.request(PowerState.RF_OFF, now)
        elif policy == EnergyPolicy.TX_POWER_ADJUST:
            sfu.power.request(PowerState.REDUCED_TX, now)

    def _maybe_deep_sleep(self, now: int) -> None:
        if self.deep_cmd_issued or not self.cfg.savings_enabled:
            return
        eligible = [s for s in self.cfg.sfus
                    if self.sfus[s].alive and not self.sfus[s].iot]
        if not eligible:
            return
        if all(self.mfu_sleep_view.get(s) in ("light", "deep")
               for s in eligible):
            self.deep_cmd_issued = True
            self.results.events.append((now, "deep_sleep_command", MFU))
            for s in eligible:
                if self.mfu_sleep_view.get(s) == "light":
                    self.sim.schedule(now + self.cfg.control_delay_ns,
                                      f"sfu:{s}", "deep_cmd")

    def _deep_cmd(self, sfu: SfuSim) -> None:
        now = self.sim.now
        if sfu.wake_pending:
            self.results.rejected_transitions += 1
            return
        if sfu.power.request(PowerState.DEEP_SLEEP, now):
            sfu.deep_enter = now
            self.mfu_sleep_view[sfu.name] = "deep"
        else:
            self.results.rejected_transitions += 1

    def _trigger_wake(self, name: str) -> None:
        sfu = self.sfus[name]
        now = self.sim.now
        if sfu.wake_pending or not sfu.asleep:
            return
        sfu.wake_pending = True
        prof = self.cfg.sfu_profile
        cmd_at = now + self.cfg.control_delay_ns
        if sfu.power.state == PowerState.DEEP_SLEEP:
            # command is only heard at the next deep-sleep listen window
            enter = sfu.deep_enter
            k = max(1, -(-(cmd_at - enter) // prof.t_listen_ns))
            cmd_at = enter + k * prof.t_listen_ns
            wake_done = cmd_at + prof.wake_deep_ns
        else:
            wake_done = cmd_at + prof.wake_light_ns
        self.results.events.append((now, "wake_command", name))
        self.sim.schedule(wake_done, f"sfu:{name}", "wake_done")

    def _wake_done(self, sfu: SfuSim) -> None:
        now = self.sim.now
        sfu.power.request(PowerState.IDLE, now)
        sfu.wake_pending = False
        sfu.announced_sleep = False
        sfu.deep_enter = None
        self.mfu_sleep_view.pop(sfu.name, None)
        self.deep_cmd_issued = False
        self.results.events.append((now, "wake_done", sfu.name))
        for frame in self.sleep_buffers[sfu.name].flush():
            self._optical_downstream(frame)

    # ------------------------------------------------------------------
    # liveness

    def _poll_cycle(self) -> None:
        now = self.sim.now
        for name in self.cfg.sfus:
            sfu = self.sfus[name]
            alarm = self.monitor.record_poll(name, sfu.alive,
                                             sfu.announced_sleep, now)
            if alarm is not None:
                self.results.events.append(
                    (now, f"alarm_{alarm.kind.value}", name))
        nxt = now + self.cfg.poll_cycle_ns
        if nxt <= self.cfg.horizon_ns:
            self.sim.schedule(nxt, MFU, "poll_cycle")

    # ------------------------------------------------------------------
    # event dispatch

    def _on_mfu(self, ev) -> None:
        if ev.kind == "flow_arrival":
            self._flow_arrival(ev.payload)
        elif ev.kind == "status_cycle":
            self._status_cycle()
        elif ev.kind == "alloc_cycle":
            self._alloc_cycle()
        elif ev.kind == "poll_cycle":
            self._poll_cycle()
        elif ev.kind == "upstream_burst_done":
            self._upstream_burst_done(ev.payload)
        elif ev.kind == "power_check":
            self._power_check(MFU)
        else:
            raise RuntimeError(f"unknown MFU event {ev.kind}")

    def _on_sfu(self, ev) -> None:
        name = ev.target.split(":", 1)[1]
        sfu = self.sfus[name]
        if ev.kind == "optical_rx":
            self._on_optical_rx(sfu, ev.payload)
        elif ev.kind == "air_delivered":
            self._deliver(ev.payload)
        elif ev.kind == "grant_start":
            self._grant_start(sfu, ev.payload)
        elif ev.kind == "burst_start":
            self._burst_start(sfu, ev.payload)
        elif ev.kind == "omci_rx":
            self._sfu_omci_rx(sfu, ev.payload)
        elif ev.kind == "power_check":
            self._power_check(name)
        elif ev.kind == "sleep_check":
            self._sleep_check(name)
        elif ev.kind == "deep_cmd":
            self._deep_cmd(sfu)
        elif ev.kind == "wake_done":
            self._wake_done(sfu)
        elif ev.kind == "kill":
            sfu.alive = False
        elif ev.kind == "recover":
            sfu.alive = True
        else:
            raise RuntimeError(f"unknown SFU event {ev.kind}")

    def _on_domain(self, ev) -> None:
        idx = int(ev.target.split(":", 1)[1])
        self.domains[idx].on_round()

    def _on_olt(self, ev) -> None:
        if ev.kind == "omci_rx":
            self._olt_rx(ev.payload)

    # ------------------------------------------------------------------

    def run(self) -> SimResults:
        cfg = self.cfg
        self._prime()
        digest = self.sim.run_until(cfg.horizon_ns)
        res = self.results
        res.digest = digest
        for name in cfg.sfus:
            machine = self.sfus[name].power
            machine.ledger.close(cfg.horizon_ns)
            machine.ledger.check_tiling(cfg.horizon_ns)
            res.ledgers[name] = machine.ledger
            res.profiles[name] = cfg.sfu_profile
            res.rejected_transitions += machine.rejected
        self.mfu_power.ledger.close(cfg.horizon_ns)
        self.mfu_power.ledger.check_tiling(cfg.horizon_ns)
        res.ledgers[MFU] = self.mfu_power.ledger
        res.profiles[MFU] = cfg.mfu_profile
        res.alarms = self.monitor.alarms
        res.counters = {
            "events_scheduled": self.sim.n_scheduled,
            "events_dispatched": self.sim.n_dispatched,
            "events_cancelled": self.sim.n_cancelled,
            "events_beyond_horizon": self.sim.n_beyond_horizon,
        }
        spans = [(0, 0)] + sorted(res.activity_spans)
        res.ftth_joules = ftth_baseline_joules(
            spans, cfg.horizon_ns, cfg.ftth_active_w, cfg.ftth_idle_w,
            cfg.t_act_idle_ns)
        return res


def run_scenario_config(cfg: ScenarioConfig) -> SimResults:
    return Simulation(cfg).run()

"""Agent layer: node and sink blackboards, the context / node-manager agents on
each sensor, the sink manager, and the mobile fusing agent.

Each node runs sense -> interpret -> report. The sink then runs
dispatch -> depart -> visit* -> return. Calls out of that order raise
ProtocolError. Network effects (floods, agent migration) go through netsim.
Every energy debit is scheduled on the simulator at the instant it happens,
so battery logs stay time-ordered.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .energy import (DEFAULT_MODEL, EnergyModel, UsageClass, debit, in_window,
                     solar_recharge)
from .fusion import HIGH_PROFILE, LOW_PROFILE, FusionProfile, accumulate_fuse
from .imagecore import (Image, difference, entropy, entropy_ratio_percent, requantize,
                        strength_percent)
from .netsim import (AGENT_MIGRATION, CONTEXT_FLOOD, CONTROL, FUSED_IMAGE, NetworkTopology,
                     Packet, Simulator, UnreachableError, flood, route, transmit)

RULE_DIFFERENCE = "difference"
RULE_RATIO = "ratio"
MATCH_EXACT = "exact"
MATCH_TOLERANCE = "tolerance"
RATIO_CAP = 200.0


class ProtocolError(RuntimeError):
    """An agent operation was called out of sequence."""


class DispatchRefused(RuntimeError):
    pass


class ContextKind(enum.Enum):
    GENERAL = "C_go"
    CRITICAL = "C_co"
    NIGHT = "NIGHT"


USER_REQUEST = "user"


@dataclass(frozen=True)
class ContextRecord:
    kind: ContextKind
    sensed_at: float
    source_node: int


@dataclass
class NodeBlackboard:
    node_id: int
    location: tuple
    status: str = "inactive"
    battery_mv: float = 0.0
    signal_strength_pct: float = 0.0
    power_mw: float = 0.0
    critical_images: list = field(default_factory=list)
    previous_image: Image | None = None
    present_image: Image | None = None
    sensed_at: float | None = None
    bandwidth_required_pct: float = 0.0
    context: ContextRecord | None = None
    # both activity statistics are kept whichever rule decides
    entropy_ratio_pct: float = 0.0
    difference_strength_pct: float = 0.0
    phase: str = "idle"


@dataclass
class SinkRow:
    node_id: int
    location: tuple
    status: str
    signal_strength_pct: float
    battery_mv: float
    power_mw: float
    bandwidth_required_pct: float
    context: ContextRecord | None
    sensed_at: float


@dataclass
class SinkBlackboard:
    available_bandwidth: float
    rows: dict = field(default_factory=dict)

    def upsert(self, row: SinkRow) -> bool:
        """Insert or replace a node's row; older reports never overwrite newer ones."""
        old = self.rows.get(row.node_id)
        if old is not None and old.sensed_at > row.sensed_at:
            return False
        self.rows[row.node_id] = row
        return True

    def mark_inactive(self, node_id: int) -> None:
        if node_id in self.rows:
            self.rows[node_id].status = "inactive"

    def active_rows(self, since: float = -math.inf) -> list:
        return [r for _, r in sorted(self.rows.items())
                if r.status == "active" and r.context is not None and r.sensed_at >= since]


@dataclass
class FusingAgent:
    agent_id: int
    code_size_bytes: int
    profile: FusionProfile
    trigger: object
    itinerary: list
    reverse_route: list
    dispatched_at: float
    carried_image: Image | None = None
    visited: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    location: int = 0
    phase: str = "dispatched"      # dispatched -> travelling -> returned
    slots: tuple | None = None     # packet indices of the image payload still intact
    image_packets_sent: int = 0
    records: list = field(default_factory=list)
    next_stop: tuple | None = None  # (node id, arrival ms)
    ready_at: float = 0.0
    round_at: float | None = None   # sensing instant this trip answers
    link_uses: dict = field(default_factory=dict, repr=False)

    @property
    def kind(self) -> str:
        return self.trigger.kind.value if isinstance(self.trigger, ContextRecord) else USER_REQUEST

    def pending(self) -> list:
        done = set(self.visited) | set(self.skipped)
        return [n for n in self.itinerary if n not in done]


@dataclass
class ReturnReport:
    agent_id: int
    trigger_kind: str
    resolution_class: str
    image: Image | None
    dispatched_at: float
    delivered_at: float
    delivered: bool
    visited: list
    skipped: list
    records: list
    image_packets_sent: int
    image_packets_received: int
    code_bytes: int
    image_bytes: int
    reason: str = ""
    round_at: float | None = None

    @property
    def fusion_time_ms(self) -> float:
        return self.delivered_at - self.dispatched_at


class AgentEvent(NamedTuple):
    time_ms: float
    agent_kind: str
    action: str
    node_id: int
    detail: str

    def line(self) -> str:
        return f"{self.time_ms:.3f}\t{self.agent_kind}\t{self.action}\t{self.node_id}\t{self.detail}"


@dataclass
class AgencySettings:
    threshold_pct: float = 60.0
    activity_rule: str = RULE_DIFFERENCE
    match_mode: str = MATCH_EXACT
    match_tolerance: float = 4.0
    low_profile: FusionProfile = LOW_PROFILE
    high_profile: FusionProfile = HIGH_PROFILE
    f_code: int = 4096
    context_bytes: int = 64
    control_bytes: int = 32
    night_start_h: float = 19.0
    night_end_h: float = 6.0
    processing_us_per_pixel: float = 2.0
    high_res_cost_factor: float = 4.0


def nearest_neighbour_order(start: tuple, points: dict) -> list:
    """Greedy tour over {id: (x, y)} from ``start``; ties go to the lower id."""
    left = dict(points)
    cur, order = start, []
    while left:
        nxt = min(left, key=lambda i: (math.dist(cur, left[i]), i))
        order.append(nxt)
        cur = left.pop(nxt)
    return order


def templates_match(diff: Image, templates, mode: str = MATCH_EXACT, tol: float = 4.0) -> bool:
    for t in templates:
        if t.shape != diff.shape:
            continue
        if mode == MATCH_EXACT:
            if np.array_equal(diff.pixels, t.pixels):
                return True
        elif np.mean(np.abs(diff.pixels.astype(np.int64) - t.pixels.astype(np.int64))) <= tol:
            return True
    return False


class Agency:
    """The agent layer of one simulated network."""

    def __init__(self, topo: NetworkTopology, settings: AgencySettings, feed,
                 rng: np.random.Generator, sim: Simulator | None = None,
                 energy_model: EnergyModel = DEFAULT_MODEL, loss_key: int | None = None):
        self.topo = topo
        self.settings = settings
        self.feed = feed
        self.rng = rng
        # with a loss key, each (trip, packet, link) gets its own seeded loss draw, so
        # runs that differ in one node share the fate of every packet they have in common
        self.loss_key = loss_key
        self.sim = sim or Simulator()
        self.energy_model = energy_model
        self.events: list = []
        self.reports: list = []
        self.transmissions: list = []
        self.floods: list = []
        self._seq = 0
        self._agents = 0
        self._recharged = {n.id: 0.0 for n in topo.nodes}
        templates = list(getattr(feed, "templates", []))
        self.nbb = {n.id: NodeBlackboard(n.id, n.position, battery_mv=n.battery_mv,
                                         critical_images=templates)
                    for n in topo.nodes if n.id != topo.sink_id}
        self.sbb = SinkBlackboard(topo.net_bandwidth)

    # -- plumbing -----------------------------------------------------------

    def _log(self, at, kind, action, node, detail=""):
        self.events.append(AgentEvent(float(at), kind, action, int(node), detail))

    def _sync(self, at: float):
        if at < self.sim.now:
            raise ProtocolError(f"operation at t={at} precedes simulator time {self.sim.now}")
        if at > self.sim.now:
            self.sim.advance(at)

    def is_night(self, at: float) -> bool:
        return in_window(at, self.settings.night_start_h, self.settings.night_end_h)

    def usage_class(self, at: float, critical: bool) -> UsageClass:
        if self.is_night(at):
            return UsageClass.NIGHT
        return UsageClass.DAY_CRITICAL if critical else UsageClass.DAY_NONCRITICAL

    def charge(self, node_id: int, at: float, usage: UsageClass, what: str):
        self.sim.schedule(at, self._apply_charge, node_id, at, usage, what)

    def _apply_charge(self, node_id, at, usage, what):
        node = self.topo.node(node_id)
        if not node.alive:
            self._log(at, "NMA", "debit-skipped-dead", node_id, what)
            return
        solar_recharge(node.energy, self._recharged[node_id], at, self.energy_model)
        self._recharged[node_id] = at
        debit(node.energy, usage, at, self.energy_model, what)
        bb = self.nbb.get(node_id)
        if bb is not None:
            bb.battery_mv = node.battery_mv
            bb.power_mw = node.energy.draw_mw
        while node.energy.alerts:
            t, alert = node.energy.alerts.pop(0)
            self._log(t, "NMA", alert, node_id, f"battery={node.battery_mv:g}")
            if alert == "low-battery" and node.alive:
                self._control_flood(node_id, t, "low-battery")
            elif alert == "exhausted":
                node.status = "inactive"
                if bb is not None:
                    bb.status = "inactive"
                self.sbb.mark_inactive(node_id)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _flood(self, origin, kind, nbytes, at, usage):
        pkt = Packet(self._next_seq(), kind, nbytes, origin, self.topo.sink_id)
        rep = flood(self.topo, origin, pkt, at)
        for t, u in rep.broadcasts:
            self.charge(u, t, usage, f"{kind}-broadcast")
        self.sim.record(rep.trace)
        self.floods.append((kind, rep))
        return rep

    def _control_flood(self, node_id, at, what):
        rep = self._flood(node_id, CONTROL, self.settings.control_bytes, at,
                          self.usage_class(at, False))
        self._log(at, "NMA", "control-flood", node_id,
                  f"{what} sink_reached={rep.reached_node(self.topo.sink_id)}")
        return rep

    def _loss_draw(self, agent: FusingAgent):
        if self.loss_key is None or agent is None:
            return None
        trip = int(agent.round_at if agent.round_at is not None else agent.dispatched_at)

        def draw(u, v, slot):
            k = agent.link_uses.get((slot, u, v), 0)
            agent.link_uses[(slot, u, v)] = k + 1
            return np.random.default_rng([self.loss_key, trip, slot, u, v, k]).random()
        return draw

    def _send(self, path, nbytes, at, kind, usage, slots=None, agent=None):
        rec = transmit(self.topo, path, nbytes, at, kind=kind, rng=self.rng, slots=slots,
                       draw=self._loss_draw(agent))
        for h in rec.hop_records:
            if h.attempted:
                self.charge(h.sender, h.start_ms, usage, f"{kind}-send")
        self.sim.record(rec.trace())
        self.transmissions.append(rec)
        return rec

    def settle(self) -> int:
        """Process every pending debit and delivery."""
        return self.sim.run()

    # -- node side: context agent and node manager -----------------------------

    def ca_sense(self, node_id: int, at: float, image: Image | None = None) -> NodeBlackboard:
        self._sync(at)
        node = self.topo.node(node_id)
        bb = self.nbb[node_id]
        if not node.alive:
            raise ProtocolError(f"node {node_id} is dead and cannot sense")
        if bb.phase not in ("idle", "inactive", "reported"):
            raise ProtocolError(f"node {node_id}: sense called in phase {bb.phase!r}")
        img = image if image is not None else self.feed.frame(node_id, at)
        if bb.present_image is not None:
            bb.previous_image = bb.present_image
        bb.present_image = img
        bb.sensed_at = at
        bb.context = None
        bits = img.width * img.height * img.bit_depth
        bb.bandwidth_required_pct = 100.0 * bits / self.topo.net_bandwidth
        bb.phase = "sensed"
        self.charge(node_id, at, self.usage_class(at, False), "sense")
        self._log(at, "CA", "sense", node_id, f"bits={bits}")
        return bb

    def nma_interpret(self, node_id: int, threshold_pct: float | None = None) -> ContextRecord | None:
        bb = self.nbb[node_id]
        if bb.phase != "sensed":
            raise ProtocolError(f"node {node_id}: interpret called in phase {bb.phase!r}")
        th = self.settings.threshold_pct if threshold_pct is None else threshold_pct
        at = bb.sensed_at
        node = self.topo.node(node_id)
        if bb.previous_image is None:
            bb.previous_image, bb.present_image = bb.present_image, None
            bb.status = node.status = "inactive"
            bb.phase = "inactive"
            self._log(at, "NMA", "interpret", node_id, "first-sense reference stored")
            return None
        present, previous = bb.present_image, bb.previous_image
        h1, h2 = entropy(present), entropy(previous)
        bb.entropy_ratio_pct = entropy_ratio_percent(present, previous, RATIO_CAP)
        bb.difference_strength_pct = strength_percent(present, previous)
        if self.settings.activity_rule == RULE_RATIO:
            bb.signal_strength_pct = bb.entropy_ratio_pct
        else:
            bb.signal_strength_pct = bb.difference_strength_pct
        detail = (f"H1={h1:.6g} H2={h2:.6g} ratio_pct={bb.entropy_ratio_pct:.6g}"
                  f" diff_pct={bb.difference_strength_pct:.6g}"
                  + (" degenerate-reference" if h2 == 0 else ""))
        if bb.signal_strength_pct <= th:
            bb.present_image = None
            bb.status = node.status = "inactive"
            bb.phase = "inactive"
            self._log(at, "NMA", "interpret", node_id, f"inactive {detail}")
            return None
        critical = templates_match(difference(present, previous), bb.critical_images,
                                   self.settings.match_mode, self.settings.match_tolerance)
        kind = ContextKind.CRITICAL if critical else ContextKind.GENERAL
        bb.context = ContextRecord(kind, at, node_id)
        bb.status = node.status = "active"
        bb.phase = "active"
        self._log(at, "NMA", "interpret", node_id, f"{kind.value} {detail}")
        return bb.context

    def nma_report(self, node_id: int, at: float | None = None):
        bb = self.nbb[node_id]
        if bb.phase != "active" or bb.context is None:
            raise ProtocolError(f"node {node_id}: report called in phase {bb.phase!r}")
        at = bb.sensed_at if at is None else at
        self._sync(at)
        critical = bb.context.kind is ContextKind.CRITICAL
        rep = self._flood(node_id, CONTEXT_FLOOD, self.settings.context_bytes, at,
                          self.usage_class(at, critical))
        sink = self.topo.sink_id
        bb.phase = "reported"
        if rep.reached_node(sink):
            row = SinkRow(node_id, bb.location, bb.status, bb.signal_strength_pct, bb.battery_mv,
                          bb.power_mw, bb.bandwidth_required_pct, bb.context, bb.sensed_at)
            self.sim.schedule(rep.arrival[sink], self._deliver_row, row)
            self._log(at, "NMA", "report", node_id, f"{bb.context.kind.value} hops={rep.reached[sink]}")
        else:
            self._log(at, "NMA", "report", node_id, f"{bb.context.kind.value} sink-unreached")
        return rep

    def _deliver_row(self, row: SinkRow):
        if self.sbb.upsert(row):
            self._log(self.sim.now, "SMA", "upsert", row.node_id, row.context.kind.value)

    # -- sink side -------------------------------------------------------------

    def choose_trigger(self, at: float, since: float = -math.inf):
        """C_co if any active report is critical, else NIGHT at night, else C_go."""
        rows = self.sbb.active_rows(since)
        if not rows:
            return None
        for r in rows:
            if r.context.kind is ContextKind.CRITICAL:
                return r.context
        if self.is_night(at):
            return ContextRecord(ContextKind.NIGHT, at, self.topo.sink_id)
        return rows[0].context

    def sma_dispatch(self, trigger, at: float, since: float = -math.inf) -> FusingAgent:
        self._sync(at)
        sink = self.topo.sink_id
        rows = [r for r in self.sbb.active_rows(since) if self.topo.node(r.node_id).alive]
        if not rows:
            self._log(at, "SMA", "refuse", sink, "no active nodes")
            raise DispatchRefused("no active nodes on the sink blackboard")
        if isinstance(trigger, ContextRecord) and trigger.kind is ContextKind.GENERAL:
            profile = self.settings.low_profile
        else:
            profile = self.settings.high_profile
        itinerary = nearest_neighbour_order(self.topo.sink.position, {r.node_id: r.location for r in rows})
        try:
            reverse = route(self.topo, itinerary[-1], sink)
        except UnreachableError:
            reverse = []
        self._agents += 1
        agent = FusingAgent(self._agents, self.settings.f_code, profile, trigger, itinerary, reverse,
                            at, location=sink, ready_at=at,
                            round_at=since if math.isfinite(since) else at)
        self._log(at, "SMA", "dispatch", sink,
                  f"agent={agent.agent_id} trigger={agent.kind} profile={profile.resolution_class}"
                  f" itinerary={','.join(map(str, itinerary))}")
        return agent

    def _usage_for(self, agent: FusingAgent, at: float) -> UsageClass:
        return self.usage_class(at, agent.profile.resolution_class == "high")

    def _image_bytes(self, agent: FusingAgent) -> int:
        img = agent.carried_image
        return img.width * img.height * img.bit_depth // 8

    def _migrate(self, agent: FusingAgent, at: float):
        """Send the agent from its location to the next reachable pending node.
        Unreachable or dead stops are skipped and logged."""
        agent.next_stop = None
        for nxt in agent.pending():
            if not self.topo.node(nxt).alive:
                agent.skipped.append(nxt)
                self._log(at, "FA", "skip", nxt, f"agent={agent.agent_id} dead-before-departure")
                continue
            try:
                path = route(self.topo, agent.location, nxt)
            except UnreachableError:
                agent.skipped.append(nxt)
                self._log(at, "FA", "skip", nxt, f"agent={agent.agent_id} unreachable")
                continue
            usage = self._usage_for(agent, at)
            if agent.carried_image is None:
                rec = self._send(path, agent.code_size_bytes, at, AGENT_MIGRATION, usage, agent=agent)
            else:
                nbytes = agent.code_size_bytes + self._image_bytes(agent)
                if agent.slots is None:
                    agent.image_packets_sent = -(-nbytes // self.topo.packet_size)
                rec = self._send(path, nbytes, at, FUSED_IMAGE, usage, agent.slots, agent)
                agent.slots = rec.surviving_slots
            agent.records.append(rec)
            agent.next_stop = (nxt, rec.end_ms)
            self._log(at, "FA", "migrate", agent.location,
                      f"agent={agent.agent_id} to={nxt} hops={rec.hops} arrive={rec.end_ms:.3f}"
                      f" packets={rec.packets_received}/{rec.packets_sent}")
            return agent.next_stop
        return None

    def fa_depart(self, agent: FusingAgent, at: float):
        """Outbound leg: the sink sends the agent code to the first stop."""
        self._sync(at)
        if agent.phase != "dispatched":
            raise ProtocolError(f"agent {agent.agent_id}: depart in phase {agent.phase!r}")
        agent.phase = "travelling"
        return self._migrate(agent, at)

    def fa_visit(self, agent: FusingAgent, node_id: int, at: float) -> FusingAgent:
        self._sync(at)
        if agent.phase != "travelling":
            raise ProtocolError(f"agent {agent.agent_id}: visit in phase {agent.phase!r}")
        if node_id not in agent.itinerary:
            raise ProtocolError(f"node {node_id} is not on agent {agent.agent_id}'s itinerary")
        if node_id in agent.visited or node_id in agent.skipped:
            raise ProtocolError(f"agent {agent.agent_id} already handled node {node_id}")
        if agent.next_stop is None or agent.next_stop[0] != node_id:
            raise ProtocolError(f"agent {agent.agent_id} is not headed to node {node_id}")
        node = self.topo.node(node_id)
        bb = self.nbb[node_id]
        if not node.alive or bb.present_image is None:
            agent.skipped.append(node_id)
            self._log(at, "FA", "skip", node_id, f"agent={agent.agent_id} active-node-failure")
            agent.ready_at = at
            self._migrate(agent, at)
            return agent
        img = bb.present_image
        prof = agent.profile
        if agent.carried_image is None:
            agent.carried_image = requantize(img, prof.output_bit_depth)
            action = "collect"
        else:
            agent.carried_image = accumulate_fuse(agent.carried_image, img, prof)
            action = "fuse"
        factor = self.settings.high_res_cost_factor if prof.resolution_class == "high" else 1.0
        proc_ms = img.width * img.height * self.settings.processing_us_per_pixel * factor / 1000.0
        self.charge(node_id, at, self._usage_for(agent, at), "fusion")
        agent.visited.append(node_id)
        agent.location = node_id
        agent.ready_at = at + proc_ms
        self._log(at, "FA", action, node_id, f"agent={agent.agent_id} processing_ms={proc_ms:.6g}")
        self._migrate(agent, agent.ready_at)
        return agent

    def fa_return(self, agent: FusingAgent, at: float) -> ReturnReport:
        self._sync(at)
        if agent.phase == "returned":
            raise ProtocolError(f"agent {agent.agent_id} has already returned")
        if agent.phase != "travelling":
            raise ProtocolError(f"agent {agent.agent_id}: return in phase {agent.phase!r}")
        if agent.next_stop is not None or agent.pending():
            raise ProtocolError(f"agent {agent.agent_id} still has stops {agent.pending()}")
        sink = self.topo.sink_id
        agent.phase = "returned"
        base = dict(agent_id=agent.agent_id, trigger_kind=agent.kind,
                    resolution_class=agent.profile.resolution_class, dispatched_at=agent.dispatched_at,
                    visited=list(agent.visited), skipped=list(agent.skipped), records=agent.records,
                    code_bytes=agent.code_size_bytes, round_at=agent.round_at)
        if agent.carried_image is None:
            self._log(at, "FA", "return-empty", agent.location, f"agent={agent.agent_id}")
            report = ReturnReport(image=None, delivered_at=at, delivered=False, image_packets_sent=0,
                                  image_packets_received=0, image_bytes=0, reason="no node visited", **base)
            self.reports.append(report)
            return report
        nbytes = agent.code_size_bytes + self._image_bytes(agent)
        if agent.slots is None:
            agent.image_packets_sent = -(-nbytes // self.topo.packet_size)
        path = agent.reverse_route if agent.reverse_route and agent.reverse_route[0] == agent.location else None
        if path is None or not all(self.topo.node(i).alive for i in path):
            try:
                path = route(self.topo, agent.location, sink)
            except UnreachableError:
                path = None
        if path is None:
            self._log(at, "FA", "return-lost", agent.location, f"agent={agent.agent_id} sink unreachable")
            report = ReturnReport(image=agent.carried_image, delivered_at=at, delivered=False,
                                  image_packets_sent=agent.image_packets_sent, image_packets_received=0,
                                  image_bytes=self._image_bytes(agent), reason="sink unreachable", **base)
            self.reports.append(report)
            return report
        rec = self._send(path, nbytes, at, FUSED_IMAGE, self._usage_for(agent, at), agent.slots, agent)
        agent.slots = rec.surviving_slots
        agent.records.append(rec)
        self._log(rec.end_ms, "FA", "deliver", sink,
                  f"agent={agent.agent_id} hops={rec.hops} packets={len(agent.slots)}/{agent.image_packets_sent}")
        self._log(rec.end_ms, "FA", "dispose", sink, f"agent={agent.agent_id}")
        report = ReturnReport(image=agent.carried_image, delivered_at=rec.end_ms, delivered=True,
                              image_packets_sent=agent.image_packets_sent,
                              image_packets_received=len(agent.slots), image_bytes=self._image_bytes(agent),
                              **base)
        self.reports.append(report)
        return report

"""Discrete-event model of the sensor network: placement, radio range,
duty-cycled listen/sleep, flooding, greedy geographic routing and packetised
transmission with a per-hop loss ledger."""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .energy import EnergyState

CONTEXT_FLOOD = "context-flood"
AGENT_MIGRATION = "agent-migration"
FUSED_IMAGE = "fused-image"
CONTROL = "control"
PACKET_KINDS = (CONTEXT_FLOOD, AGENT_MIGRATION, FUSED_IMAGE, CONTROL)

_PHASE_STREAM = 0x5EED


class NetworkError(ValueError):
    pass


class ConfigError(NetworkError):
    pass


class UnknownNodeError(NetworkError, KeyError):
    pass


class PathError(NetworkError):
    pass


class RoutingError(NetworkError):
    def __init__(self, stuck_node: int, message: str = ""):
        super().__init__(message or f"greedy routing stuck at node {stuck_node}")
        self.stuck_node = stuck_node


class UnreachableError(NetworkError):
    pass


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DutySchedule:
    listen_ms: float
    sleep_ms: float
    phase_ms: float = 0.0

    def __post_init__(self):
        if self.listen_ms <= 0:
            raise ConfigError(f"listen period must be > 0 ms, got {self.listen_ms}")
        if self.sleep_ms < 0:
            raise ConfigError(f"sleep period must be >= 0 ms, got {self.sleep_ms}")

    @property
    def period(self) -> float:
        return self.listen_ms + self.sleep_ms

    def is_awake(self, at: float) -> bool:
        if self.sleep_ms == 0:
            return True
        return (at - self.phase_ms) % self.period < self.listen_ms

    def next_awake(self, at: float) -> float:
        """Earliest instant >= at when the radio listens."""
        if self.is_awake(at):
            return at
        k = math.floor((at - self.phase_ms) / self.period) + 1
        return self.phase_ms + k * self.period


ALWAYS_AWAKE = DutySchedule(1.0, 0.0)


@dataclass
class Node:
    id: int
    position: tuple
    energy: EnergyState
    duty: DutySchedule = ALWAYS_AWAKE
    status: str = "inactive"
    blackboard: object = None
    seen: set = field(default_factory=set)    # (origin, seq) of floods already forwarded

    @property
    def alive(self) -> bool:
        return self.energy.alive

    @property
    def battery_mv(self) -> float:
        return self.energy.battery_mv


@dataclass(frozen=True)
class Packet:
    seq: int
    kind: str
    payload_bytes: int
    src: int
    dst: int
    hop_count: int = 0

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise NetworkError("packet payload must be positive")
        if self.kind not in PACKET_KINDS:
            raise NetworkError(f"unknown packet kind {self.kind!r}")


class TraceEvent(NamedTuple):
    time_ms: float
    kind: str
    src: int
    dst: int
    nbytes: int
    outcome: str

    def line(self) -> str:
        return f"{self.time_ms:.3f}\t{self.kind}\t{self.src}\t{self.dst}\t{self.nbytes}\t{self.outcome}"


@dataclass
class NetworkTopology:
    area: tuple
    nodes: list
    sink_id: int
    comm_radius: float
    net_bandwidth: float            # bit/s
    propagation_beta: float = 3.5
    tx_power: float = 1.0           # mW
    rx_threshold: float | None = None
    packet_size: int = 1024         # bytes of payload per packet
    hop_overhead_ms: float = 1.0
    loss_probability: float = 0.0

    def __post_init__(self):
        problems = []
        if self.comm_radius <= 0:
            problems.append("comm_radius must be > 0")
        if self.propagation_beta <= 0:
            problems.append("propagation beta must be > 0")
        if self.net_bandwidth <= 0:
            problems.append("net_bandwidth must be > 0")
        if self.packet_size <= 0:
            problems.append("packet_size must be > 0")
        if not 0.0 <= self.loss_probability <= 1.0:
            problems.append("loss probability must be in [0, 1]")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            problems.append("duplicate node ids")
        if self.sink_id not in ids:
            problems.append(f"sink {self.sink_id} is not a node")
        a, b = self.area
        for n in self.nodes:
            x, y = n.position
            if not (0 <= x <= a and 0 <= y <= b):
                problems.append(f"node {n.id} at {n.position} outside the {a}x{b} area")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.rx_threshold is None:
            self.rx_threshold = self.tx_power / self.comm_radius ** self.propagation_beta
        self._by_id = {n.id: n for n in self.nodes}
        self._adj = None

    # -- geometry / radio ---------------------------------------------------

    def node(self, i: int) -> Node:
        try:
            return self._by_id[i]
        except KeyError:
            raise UnknownNodeError(f"no node {i}") from None

    @property
    def ids(self):
        return [n.id for n in self.nodes]

    @property
    def sink(self) -> Node:
        return self.node(self.sink_id)

    def distance(self, i: int, j: int) -> float:
        (x1, y1), (x2, y2) = self.node(i).position, self.node(j).position
        return math.hypot(x1 - x2, y1 - y2)

    def link_power(self, i: int, j: int) -> float:
        d = self.distance(i, j)
        return math.inf if d == 0 else self.tx_power / d ** self.propagation_beta

    def in_range(self, i: int, j: int) -> bool:
        d = self.distance(i, j)
        if d > self.comm_radius:
            return False
        # tolerate the rounding of tx/r^beta at exactly d == r
        return self.link_power(i, j) >= self.rx_threshold * (1 - 1e-12)

    def neighbors(self, i: int) -> list:
        if self._adj is None:
            self._adj = {n.id: [m.id for m in self.nodes if m.id != n.id and self.in_range(n.id, m.id)]
                         for n in self.nodes}
        self.node(i)
        return self._adj[i]

    def components(self) -> list:
        """Connected components over radio links, each sorted by id."""
        left, comps = set(self.ids), []
        for start in sorted(self.ids):
            if start not in left:
                continue
            comp, queue = [], deque([start])
            left.discard(start)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in self.neighbors(u):
                    if v in left:
                        left.discard(v)
                        queue.append(v)
            comps.append(sorted(comp))
        return comps

    def serialization_ms(self, nbytes: int) -> float:
        return nbytes * 8 / self.net_bandwidth * 1000.0


def build_topology(config, seed: int) -> NetworkTopology:
    """Sink is node 0 at the configured position; sensors 1..num are placed
    uniformly at random, one draw pair per node in id order, so a larger num
    extends a smaller layout with the same seed."""
    num = int(config.num)
    if num < 2:
        raise ConfigError(f"num must be >= 2, got {num}")
    a, b = float(config.area_a), float(config.area_b)
    if a <= 0 or b <= 0:
        raise ConfigError("area sides must be positive")
    rng = np.random.default_rng([seed, 0])
    positions = [(float(config.sink_x), float(config.sink_y))]
    for _ in range(num):
        positions.append((float(rng.uniform(0, a)), float(rng.uniform(0, b))))
    rx = config.rx_threshold if config.rx_threshold > 0 else None
    topo = NetworkTopology(
        area=(a, b),
        nodes=[Node(i, p, EnergyState.full(config.node_batt)) for i, p in enumerate(positions)],
        sink_id=0,
        comm_radius=float(config.comm_radius),
        net_bandwidth=float(config.net_bandwidth),
        propagation_beta=float(config.beta),
        tx_power=float(config.tx_power),
        rx_threshold=rx,
        packet_size=int(config.packet_size),
        hop_overhead_ms=float(config.hop_overhead_ms),
        loss_probability=float(config.loss_probability()),
    )
    assign_duty(topo, config.listen_ms, config.sleep_ms, seed)
    return topo


def assign_duty(topo: NetworkTopology, listen_ms: float, sleep_ms: float, seed: int | None = None):
    """Give every connected component (a virtual cluster) one shared schedule.
    The phase is drawn from a stream keyed by the component's lowest id."""
    period = listen_ms + sleep_ms
    for comp in topo.components():
        if seed is None or sleep_ms == 0:
            phase = 0.0
        else:
            phase = float(np.random.default_rng([seed, comp[0], _PHASE_STREAM]).uniform(0, period))
        sched = DutySchedule(listen_ms, sleep_ms, phase)
        for i in comp:
            topo.node(i).duty = sched


def topology_from_positions(positions, *, sink_id: int = 0, comm_radius: float = 10.0,
                            net_bandwidth: float = 4e6, node_batt: float = 90.0,
                            duty: DutySchedule = ALWAYS_AWAKE, area=None, **kw) -> NetworkTopology:
    """Hand-built layouts for tests and fixtures."""
    if area is None:
        area = (max(x for x, _ in positions), max(y for _, y in positions))
    nodes = [Node(i, tuple(map(float, p)), EnergyState.full(node_batt), duty) for i, p in enumerate(positions)]
    return NetworkTopology(area, nodes, sink_id, comm_radius, net_bandwidth, **kw)


def is_awake(node: Node, at: float) -> bool:
    return node.duty.is_awake(at)


# -- flooding ---------------------------------------------------------------

@dataclass
class FloodReport:
    origin: int
    seq: int
    reached: dict            # node id -> hop count
    arrival: dict            # node id -> arrival time (ms)
    transmissions: int = 0
    broadcasts: list = field(default_factory=list)   # (time_ms, node id)
    dropped: int = 0         # copies lost to a sleeping receiver
    duplicates: int = 0      # copies discarded by (origin, seq) suppression
    trace: list = field(default_factory=list)

    def reached_node(self, i: int) -> bool:
        return i in self.reached


def flood(topo: NetworkTopology, origin: int, packet: Packet, at: float) -> FloodReport:
    """Broadcast flood with (origin, seq) duplicate suppression. Each node that
    accepts the message rebroadcasts it once, at the start of its next listen
    window. Copies arriving at a sleeping neighbour are dropped."""
    src = topo.node(origin)
    key = (origin, packet.seq)
    rep = FloodReport(origin, packet.seq, {origin: 0}, {origin: at})
    if not src.alive or key in src.seen:
        return rep
    tx_ms = topo.serialization_ms(packet.payload_bytes) + topo.hop_overhead_ms
    order = 0
    queue = [(at, order, origin)]
    while queue:
        ready, _, u = heapq.heappop(queue)
        node = topo.node(u)
        if key in node.seen or not node.alive:
            continue
        node.seen.add(key)
        start = node.duty.next_awake(ready)
        rep.transmissions += 1
        rep.broadcasts.append((start, u))
        t_arr = start + tx_ms
        for v in topo.neighbors(u):
            nv = topo.node(v)
            if not nv.alive:
                continue
            if v in rep.reached or key in nv.seen:
                rep.duplicates += 1
                rep.trace.append(TraceEvent(t_arr, packet.kind, u, v, packet.payload_bytes, "duplicate"))
                continue
            if not nv.duty.is_awake(t_arr):
                rep.dropped += 1
                rep.trace.append(TraceEvent(t_arr, packet.kind, u, v, packet.payload_bytes, "asleep"))
                continue
            rep.reached[v] = rep.reached[u] + 1
            rep.arrival[v] = t_arr
            rep.trace.append(TraceEvent(t_arr, packet.kind, u, v, packet.payload_bytes, "delivered"))
            order += 1
            heapq.heappush(queue, (t_arr, order, v))
    return rep


# -- routing ---------------------------------------------------------------

def geo_route(topo: NetworkTopology, src: int, dst: int, alive_only: bool = True) -> list:
    """Greedy geographic forwarding: each hop goes to the in-range neighbour
    strictly closest to the destination (ties to the lower id)."""
    topo.node(src), topo.node(dst)
    path = [src]
    cur = src
    while cur != dst:
        here = topo.distance(cur, dst)
        best, best_d = None, here
        for v in topo.neighbors(cur):
            if alive_only and not topo.node(v).alive:
                continue
            d = topo.distance(v, dst)
            if d < best_d or (d == best_d and best is not None and v < best):
                best, best_d = v, d
        if best is None:
            raise RoutingError(cur)
        path.append(best)
        cur = best
    return path


def shortest_path(topo: NetworkTopology, src: int, dst: int, alive_only: bool = True):
    """Fewest-hop path by breadth-first search (the route a flood discovers),
    or None when dst is unreachable."""
    topo.node(src), topo.node(dst)
    prev = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        for v in topo.neighbors(u):
            if v not in prev and (not alive_only or topo.node(v).alive):
                prev[v] = u
                queue.append(v)
    if dst not in prev:
        return None
    path = [dst]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def route(topo: NetworkTopology, src: int, dst: int) -> list:
    """Greedy route, falling back to the flood-discovered path around voids."""
    try:
        return geo_route(topo, src, dst)
    except RoutingError:
        path = shortest_path(topo, src, dst)
        if path is None:
            raise UnreachableError(f"node {dst} unreachable from {src}") from None
        return path


# -- packetised transmission ---------------------------------------------------

@dataclass
class HopRecord:
    sender: int
    receiver: int
    start_ms: float
    end_ms: float
    attempted: int
    delivered: int
    nbytes: int

    @property
    def dropped(self) -> int:
        return self.attempted - self.delivered


@dataclass
class TransmissionRecord:
    kind: str
    path: list
    payload_bytes: int
    packets_per_payload: int         # m_al
    packets_sent: int
    packets_received: int
    start_ms: float
    end_ms: float
    hop_records: list = field(default_factory=list)
    surviving_slots: tuple = ()
    dropped_asleep: int = 0
    dropped_loss: int = 0
    dropped_dead: int = 0

    @property
    def hops(self) -> int:
        return len(self.path) - 1

    @property
    def t_load(self) -> int:
        return self.packets_per_payload * self.hops

    @property
    def latency(self) -> float:
        return self.end_ms - self.start_ms

    @property
    def packets_dropped(self) -> int:
        return self.packets_sent - self.packets_received

    def ledger_balanced(self) -> bool:
        att = sum(h.attempted for h in self.hop_records)
        dlv = sum(h.delivered for h in self.hop_records)
        drp = sum(h.dropped for h in self.hop_records)
        causes = self.dropped_asleep + self.dropped_loss + self.dropped_dead
        return att == dlv + drp and drp == self.packets_dropped == causes

    def trace(self) -> list:
        out = []
        for h in self.hop_records:
            out.append(TraceEvent(h.end_ms, self.kind, h.sender, h.receiver, h.nbytes,
                                  f"delivered={h.delivered}/{h.attempted}"))
        return out


def _burst_start(duty: DutySchedule, t: float, first_ms: float) -> float:
    """Earliest start >= t at which a packet taking ``first_ms`` arrives while
    the receiver listens. Falls back to the window start when even a fresh
    window is too short for one packet."""
    start = duty.next_awake(t)
    if duty.sleep_ms == 0 or duty.is_awake(start + first_ms):
        return start
    return duty.next_awake(start + duty.listen_ms - (start - duty.phase_ms) % duty.period)


def packet_count(payload_bytes: int, packet_size: int) -> int:
    return -(-int(payload_bytes) // int(packet_size))


def transmit(topo: NetworkTopology, path, payload_bytes: int, at: float, *,
             kind: str = FUSED_IMAGE, rng: np.random.Generator | None = None,
             slots=None, loss: float | None = None, draw=None) -> TransmissionRecord:
    """Send a payload along ``path`` as m_al back-to-back packets per hop.

    Before each hop the sender waits for a listen window of the receiver in
    which at least the first packet can land; the burst then runs without
    pausing, so packets arriving after the window closes are lost. Each packet also survives a Bernoulli loss draw per hop.
    ``slots`` restricts the burst to packet indices that survived an earlier
    leg of the same payload (no retransmission). ``draw(u, v, slot)``, when
    given, supplies the uniform variate for each loss draw instead of ``rng``.
    """
    path = list(path)
    if not path:
        raise PathError("empty path")
    for u, v in zip(path, path[1:]):
        if not topo.in_range(u, v):
            raise PathError(f"nodes {u} and {v} are not in range ({topo.distance(u, v):.3f} m)")
    if payload_bytes <= 0:
        raise NetworkError("payload must be positive")
    loss = topo.loss_probability if loss is None else loss
    if loss > 0 and rng is None and draw is None:
        raise NetworkError("a lossy transmission needs an rng")
    m_al = packet_count(payload_bytes, topo.packet_size)
    sizes = [topo.packet_size] * (m_al - 1) + [payload_bytes - topo.packet_size * (m_al - 1)]
    live = list(range(m_al)) if slots is None else sorted(slots)
    rec = TransmissionRecord(kind, path, int(payload_bytes), m_al, len(live), 0, at, at)
    t = at
    for u, v in zip(path, path[1:]):
        recv = topo.node(v)
        if not live:
            rec.hop_records.append(HopRecord(u, v, t, t, 0, 0, 0))
            continue
        first_ms = topo.hop_overhead_ms + topo.serialization_ms(sizes[live[0]])
        start = _burst_start(recv.duty, t, first_ms) if recv.alive else t
        cursor = start + topo.hop_overhead_ms
        kept, nbytes = [], 0
        for s in live:
            cursor += topo.serialization_ms(sizes[s])
            nbytes += sizes[s]
            if not recv.alive or not topo.node(u).alive:
                rec.dropped_dead += 1
            elif not recv.duty.is_awake(cursor):
                rec.dropped_asleep += 1
            elif loss > 0 and (draw(u, v, s) if draw is not None else rng.random()) < loss:
                rec.dropped_loss += 1
            else:
                kept.append(s)
        rec.hop_records.append(HopRecord(u, v, start, cursor, len(live), len(kept), nbytes))
        live = kept
        t = cursor
    rec.packets_received = len(live)
    rec.surviving_slots = tuple(live)
    rec.end_ms = t
    return rec


# -- event loop ----------------------------------------------------------------

class Simulator:
    """Priority queue of callbacks ordered by (time, insertion order)."""

    def __init__(self, start: float = 0.0):
        self.now = float(start)
        self._queue = []
        self._seq = 0
        self.trace: list = []

    def schedule(self, time: float, fn: Callable, *args) -> None:
        if time < self.now:
            raise SimulationError(f"cannot schedule at {time} before now={self.now}")
        heapq.heappush(self._queue, (float(time), self._seq, fn, args))
        self._seq += 1

    def pending(self) -> int:
        return len(self._queue)

    def advance(self, until: float) -> int:
        if until < self.now:
            raise SimulationError(f"advance to {until} would move the clock back from {self.now}")
        count = 0
        while self._queue and self._queue[0][0] <= until:
            time, _, fn, args = heapq.heappop(self._queue)
            self.now = time
            fn(*args)
            count += 1
        self.now = float(until)
        return count

    def run(self) -> int:
        count = 0
        while self._queue:
            count += self.advance(self._queue[0][0])
        return count

    def record(self, events) -> None:
        self.trace.extend(events)

    def trace_lines(self) -> list:
        order = sorted(range(len(self.trace)), key=lambda i: (self.trace[i].time_ms, i))
        return [self.trace[i].line() for i in order]


def advance(sim: Simulator, until: float) -> int:
    return sim.advance(until)

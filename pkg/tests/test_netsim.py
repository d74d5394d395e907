import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctxfuse.config import PAPER_DEFAULT, DESK
from ctxfuse.netsim import (ALWAYS_AWAKE, CONTEXT_FLOOD, FUSED_IMAGE, ConfigError, DutySchedule,
                            NetworkError, Packet, PathError, RoutingError, SimulationError,
                            Simulator, UnreachableError, advance, build_topology, flood, geo_route,
                            packet_count, route, shortest_path, topology_from_positions, transmit)


def line(n=5, spacing=10.0, **kw):
    """Sink 0 at the left end; node i sits i*spacing to the right."""
    pts = [(i * spacing, 0.0) for i in range(n)]
    return topology_from_positions(pts, comm_radius=spacing, area=((n - 1) * spacing, 1.0), **kw)


def void_topology():
    """Greedy routing from 1 to 4 dead-ends at node 1: its only neighbour (2)
    is farther from 4, so the path must detour around the void."""
    pts = [(1, 0), (10, 0), (10, 9), (19, 9), (22, 0)]
    return topology_from_positions(pts, comm_radius=9.5, area=(22, 9))


# -- duty cycle -----------------------------------------------------------------

def test_duty_examples():
    assert DutySchedule(100, 0).is_awake(12345.6)
    with pytest.raises(ConfigError):
        DutySchedule(0, 50)
    d = DutySchedule(50, 50, 0)
    assert not d.is_awake(75) and d.is_awake(25) and d.is_awake(100)
    assert d.next_awake(75) == 100 and d.next_awake(20) == 20
    assert DutySchedule(50, 50, 30).next_awake(0) == 30 and DutySchedule(50, 50, 30).next_awake(81) == 130


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 200), st.floats(0, 200), st.floats(0, 400), st.floats(0, 1e6))
def test_next_awake_is_awake_and_earliest(listen, sleep, phase, t):
    d = DutySchedule(listen, sleep, phase)
    w = d.next_awake(t)
    assert w >= t
    assert d.is_awake(w) or math.isclose((w - phase) % d.period, 0, abs_tol=1e-6) \
        or math.isclose((w - phase) % d.period, d.period, abs_tol=1e-6)
    assert w - t <= sleep + 1e-6


# -- topology ---------------------------------------------------------------------

def test_build_topology_deterministic_and_nested():
    a = build_topology(DESK, 3)
    b = build_topology(DESK, 3)
    assert [n.position for n in a.nodes] == [n.position for n in b.nodes]
    bigger = build_topology(DESK.replace(num=DESK.num + 4), 3)
    assert [n.position for n in bigger.nodes[: DESK.num + 1]] == [n.position for n in a.nodes]
    assert a.sink.position == (DESK.sink_x, DESK.sink_y)


def test_range_is_geometric():
    t = line(3)
    assert t.in_range(0, 1) and not t.in_range(0, 2)
    assert t.neighbors(1) == [0, 2]


def test_components_share_duty_phase():
    topo = build_topology(PAPER_DEFAULT, 7)
    for comp in topo.components():
        assert len({topo.node(i).duty for i in comp}) == 1


def test_out_of_area_rejected():
    with pytest.raises(ConfigError):
        topology_from_positions([(0, 0), (50, 0)], area=(10, 10))


# -- flooding ---------------------------------------------------------------

def test_flood_line_hops_and_arrivals():
    t = line(5, net_bandwidth=8000.0, hop_overhead_ms=1.0)
    rep = flood(t, 4, Packet(1, CONTEXT_FLOOD, 64, 4, 0), 100.0)
    assert rep.reached == {4: 0, 3: 1, 2: 2, 1: 3, 0: 4}
    per_hop = 64 * 8 / 8000.0 * 1000 + 1.0
    assert rep.arrival[0] == pytest.approx(100 + 4 * per_hop)
    assert rep.transmissions == 5


def test_flood_second_copy_suppressed():
    t = line(4)
    pkt = Packet(9, CONTEXT_FLOOD, 64, 1, 0)
    first = flood(t, 1, pkt, 0.0)
    again = flood(t, 1, pkt, 10.0)
    assert len(first.reached) == 4 and again.transmissions == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 14), st.floats(15, 60))
def test_flood_covers_component_once(seed, n, r):
    rng = np.random.default_rng(seed)
    pts = [(float(x), float(y)) for x, y in rng.uniform(0, 100, size=(n, 2))]
    t = topology_from_positions(pts, comm_radius=r, area=(100, 100))
    origin = int(rng.integers(n))
    rep = flood(t, origin, Packet(1, CONTEXT_FLOOD, 32, origin, 0), 0.0)
    comp = next(c for c in t.components() if origin in c)
    assert sorted(rep.reached) == comp
    assert sorted(u for _, u in rep.broadcasts) == comp          # each node forwards once
    assert rep.transmissions == len(comp)


def test_flood_asleep_copies_dropped():
    t = line(3, duty=DutySchedule(1.0, 99.0, 0.0), net_bandwidth=1e6, hop_overhead_ms=5.0)
    rep = flood(t, 2, Packet(1, CONTEXT_FLOOD, 64, 2, 0), 0.0)
    assert rep.dropped >= 1 and rep.reached == {2: 0}


# -- routing ---------------------------------------------------------------------

def test_geo_route_line():
    assert geo_route(line(5), 4, 0) == [4, 3, 2, 1, 0]


def test_void_greedy_fails_route_recovers():
    t = void_topology()
    with pytest.raises(RoutingError) as err:
        geo_route(t, 1, 4)
    assert err.value.stuck_node == 1
    assert route(t, 1, 4) == [1, 2, 3, 4]
    assert shortest_path(t, 1, 4) == [1, 2, 3, 4]


def test_unreachable():
    t = topology_from_positions([(0, 0), (5, 0), (50, 0)], comm_radius=6, area=(50, 1))
    with pytest.raises(UnreachableError):
        route(t, 0, 2)
    assert shortest_path(t, 0, 2) is None


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_greedy_monotone(seed):
    rng = np.random.default_rng(seed)
    pts = [(float(x), float(y)) for x, y in rng.uniform(0, 100, size=(12, 2))]
    t = topology_from_positions(pts, comm_radius=40, area=(100, 100))
    try:
        path = geo_route(t, 0, 11)
    except RoutingError:
        return
    d = [t.distance(u, 11) for u in path]
    assert all(a > b for a, b in zip(d, d[1:]))


# -- transmission ------------------------------------------------------------------

def test_transmit_examples():
    t = line(4, packet_size=1024)
    rec = transmit(t, [3, 2, 1, 0], 1024, 0.0)
    assert (rec.packets_per_payload, rec.hops, rec.t_load, rec.packets_received) == (1, 3, 3, 1)
    rec = transmit(t, [2, 1, 0], 32768, 0.0)
    assert (rec.packets_per_payload, rec.t_load) == (32, 64)
    rec = transmit(t, [2, 1, 0], 4096, 0.0, rng=np.random.default_rng(0), loss=1.0)
    assert rec.packets_received == 0 and rec.ledger_balanced()


def test_transmit_latency():
    t = line(3, packet_size=1000, net_bandwidth=8e6, hop_overhead_ms=0.5)
    rec = transmit(t, [2, 1, 0], 2500, 10.0)
    # per hop: 0.5 ms overhead + 2500 bytes at 1 byte/us
    assert rec.end_ms == pytest.approx(10.0 + 2 * (0.5 + 2.5))


def test_transmit_errors():
    t = line(4)
    with pytest.raises(PathError):
        transmit(t, [3, 1], 100, 0.0)
    with pytest.raises(NetworkError):
        transmit(t, [1, 0], 100, 0.0, loss=0.5)
    with pytest.raises(NetworkError):
        transmit(t, [1, 0], 0, 0.0)


def test_burst_spills_past_listen_window():
    # 10 packets of 2 ms each, a 9 ms listen window: the first 4 make it
    t = line(2, duty=DutySchedule(9.0, 91.0, 0.0), packet_size=1000, net_bandwidth=4e6,
             hop_overhead_ms=0.0)
    rec = transmit(t, [1, 0], 10000, 0.0)
    assert rec.packets_received == 4 and rec.dropped_asleep == 6
    assert rec.surviving_slots == (0, 1, 2, 3)


def test_transmit_waits_for_listen_window():
    t = line(2, duty=DutySchedule(50.0, 50.0, 0.0))
    rec = transmit(t, [1, 0], 100, 60.0)
    assert rec.hop_records[0].start_ms == 100.0


def test_burst_deferred_when_first_packet_cannot_land():
    # 1 ms left in the window but the first packet needs 2 ms: wait a period
    t = line(2, duty=DutySchedule(50.0, 50.0, 0.0), packet_size=1000, net_bandwidth=4e6,
             hop_overhead_ms=0.0)
    rec = transmit(t, [1, 0], 2000, 49.0)
    assert rec.hop_records[0].start_ms == 100.0
    assert rec.packets_received == 2 and rec.dropped_asleep == 0
    # with 3 ms left the first packet lands and the second spills
    rec = transmit(t, [1, 0], 2000, 47.0)
    assert rec.hop_records[0].start_ms == 47.0
    assert rec.packets_received == 1 and rec.dropped_asleep == 1


def test_slots_carry_across_legs():
    t = line(3)
    rec = transmit(t, [2, 1], 4096, 0.0, slots=(0, 3))
    assert rec.packets_sent == 2 and rec.surviving_slots == (0, 3)
    assert rec.t_load == 4


def test_keyed_draws_replace_rng():
    t = line(3, loss_probability=0.5)
    calls = []

    def draw(u, v, s):
        calls.append((u, v, s))
        return 0.9 if s % 2 else 0.1
    rec = transmit(t, [2, 1, 0], 4096, 0.0, draw=draw)
    assert rec.surviving_slots == (1, 3)
    assert calls == [(2, 1, 0), (2, 1, 1), (2, 1, 2), (2, 1, 3), (1, 0, 1), (1, 0, 3)]


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 20000), st.floats(0, 1), st.integers(0, 2 ** 32 - 1),
       st.floats(1, 60), st.floats(0, 60))
def test_ledger_balances_and_t_load(nbytes, loss, seed, listen, sleep):
    t = line(5, duty=DutySchedule(listen, sleep, 3.0))
    rec = transmit(t, [4, 3, 2, 1, 0], nbytes, 17.0, rng=np.random.default_rng(seed), loss=loss)
    assert rec.ledger_balanced()
    assert rec.t_load == packet_count(nbytes, t.packet_size) * 4
    assert 0 <= rec.packets_received <= rec.packets_sent
    assert rec.end_ms >= rec.start_ms


def test_dead_receiver_drops_everything():
    t = line(3)
    t.node(1).energy.battery_mv = 0.0
    rec = transmit(t, [2, 1, 0], 3000, 0.0)
    assert rec.packets_received == 0 and rec.dropped_dead == 3


# -- event loop ----------------------------------------------------------------

def test_simulator_order_and_clock():
    sim = Simulator()
    seen = []
    sim.schedule(5, seen.append, "b")
    sim.schedule(2, seen.append, "a")
    sim.schedule(5, seen.append, "c")
    assert advance(sim, 4) == 1 and sim.now == 4
    assert sim.run() == 2
    assert seen == ["a", "b", "c"]
    with pytest.raises(SimulationError):
        sim.advance(1)
    with pytest.raises(SimulationError):
        sim.schedule(0, seen.append, "x")
    empty = Simulator()
    assert empty.advance(10) == 0 and empty.now == 10


def test_packet_validation():
    with pytest.raises(NetworkError):
        Packet(1, "bogus", 10, 0, 1)
    with pytest.raises(NetworkError):
        Packet(1, FUSED_IMAGE, 0, 0, 1)
    assert ALWAYS_AWAKE.is_awake(-5)

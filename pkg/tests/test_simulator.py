import csv
import heapq
import random
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from didcnc.model import ClientSpec, Scenario, default_grid_scenario
from didcnc.simulator import (
    LIVE,
    MIN_STABILITY_SLOTS,
    Simulation,
    _Job,
    backlog_slope,
    detect_stability,
    run,
    summary_row,
    write_summary,
)

from conftest import bidirectional, line_graph, make_graph, random_instance, service


def _metrics_equal(a, b):
    for name in ("arrivals", "dropped", "delivered_packets", "completed_requests", "delays", "backlog", "work",
                 "delivered_series", "delay_sum_series", "delay_count_series", "node_utilization",
                 "link_utilization"):
        x, y = getattr(a, name), getattr(b, name)
        assert np.array_equal(x, y), name
    assert (a.slots, a.stopped_early) == (b.slots, b.stopped_early)


def _accumulator_scenario(slots):
    g = make_graph("uv", [("u", "v")], proc=10, link=10, sources={"k": {"u"}})
    client = ClientSpec("u", "v", service(("1/2", "1/10", "k", 0)), 50)
    return Scenario(graph=g, clients=(client,), slot_count=slots, max_arrivals_per_slot=1)


@pytest.mark.parametrize("engine", ["fast", "reference"])
def test_half_scaling_accumulator(engine):
    rec = Simulation(_accumulator_scenario(11), engine=engine).run()
    assert list(rec.arrivals) == [11]
    # every other processed packet completes a whole output packet, which needs one hop
    assert list(rec.delivered_series) == [0, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
    assert list(rec.delivered_series[:3]) == [0, 0, 1]


def test_ento_link_order():
    g = make_graph("uv", [("u", "v")], link=2, sources={"k": {"u"}})
    sc = Scenario(graph=g, clients=(ClientSpec("u", "v", service((1, 1, "k", 0)), 1),))
    sim = Simulation(sc, engine="reference")
    heap = sim.link_heaps[0]
    for crossed in (2, 0, 1):
        job = _Job(LIVE, 0, 1, (0, 1), (0,), 1, crossed, 0, crossed + 1, {}, 0, None)
        heapq.heappush(heap, (crossed, 0, crossed + 1, crossed, job))
    sim.debug = True
    sim.link_used = np.zeros(1)
    sim._transmit(0)
    assert sorted(j.crossed - 1 for j in sim.inflight) == [0, 1]
    assert [k[0] for k in heap] == [2]


def _tandem(rate, slots, **kw):
    g = line_graph("sabd", cap=20, proc=10, sources={"k": {"b"}})
    client = ClientSpec("s", "d", service((2, 1, "k", 1)), rate)
    return Scenario(graph=g, clients=(client,), slot_count=slots, **kw)


def test_tandem_throughput():
    sc = _tandem(3, 20_000)
    rec = run(sc)
    T = rec.slots
    assert not rec.stopped_early
    assert rec.delivered_packets[0] / T == pytest.approx(3 * 2, rel=0.02)
    assert rec.throughput == pytest.approx(3, rel=0.02)
    # three hops from s to d whatever the processing node
    assert rec.delays.min() >= 3
    assert rec.stable


def test_zero_rate_network_stays_empty():
    sc = replace(default_grid_scenario(rate=0), slot_count=500)
    sim = Simulation(sc, engine="reference")
    rec = sim.run()
    assert rec.delivered_packets.sum() == 0 and not rec.backlog.any() and not rec.work.any()
    assert not sim.vq_node.any() and not sim.vq_link.any()
    fast = Simulation(sc).run()
    _metrics_equal(rec, fast)


def test_default_grid_stable_at_four():
    rec = run(replace(default_grid_scenario(rate=4), slot_count=100_000))
    assert not rec.stopped_early
    assert np.isfinite(rec.mean_delay)
    assert rec.stable
    assert abs(backlog_slope(rec.backlog)) < 0.01


def test_same_seed_bit_identical():
    sc = replace(default_grid_scenario(rate=9), slot_count=20_000, seed=3)
    _metrics_equal(run(sc), run(sc))
    other = run(replace(sc, seed=4))
    assert not np.array_equal(other.backlog, run(sc).backlog)


@pytest.mark.parametrize("policy,rate,slots", [("DI-DCNC", 6, 1500), ("S2L", 8, 1200), ("L2S", 3, 1500)])
def test_fast_engine_matches_reference(policy, rate, slots):
    sc = replace(default_grid_scenario(rate=rate), slot_count=slots, seed=11)
    ref = Simulation(sc, policy, engine="reference", debug=True).run()
    fast = Simulation(sc, policy, engine="fast", debug=True).run()
    _metrics_equal(ref, fast)
    assert ref.operations == fast.operations


def test_overload_stops_early():
    sc = replace(default_grid_scenario(rate=30), slot_count=20_000)
    rec = run(sc, "L2S")
    assert rec.stopped_early and rec.slots < 20_000
    assert not rec.stable and rec.mean_delay == np.inf


def test_detect_stability_cases():
    flat = np.full(MIN_STABILITY_SLOTS, 50.0)
    assert detect_stability(flat, 4.0) == "stable"
    lam = 4.0
    growing = lam / 2 * np.arange(MIN_STABILITY_SLOTS)
    assert detect_stability(growing, lam) == "unstable"
    noisy = flat + np.random.default_rng(0).normal(0, 5, MIN_STABILITY_SLOTS)
    assert detect_stability(noisy, lam) == "stable"
    with pytest.raises(ValueError):
        detect_stability(flat[:100], lam)
    assert backlog_slope(growing) == pytest.approx(2.0)


def test_short_run_has_no_verdict(tmp_path):
    sc = replace(default_grid_scenario(rate=2), slot_count=300)
    rec = run(sc)
    with pytest.raises(ValueError):
        rec.stable
    row = summary_row(sc, rec, cache_index=1)
    assert row["stable"] == "" and row["policy"] == "DI-DCNC" and row["cache_index"] == 1
    write_summary([row], tmp_path / "s.csv")
    rec.to_csv(tmp_path / "t.csv", window=50)
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["slot", "total_backlog", "unfinished_work", "delivered", "mean_delay_window"]
    assert len(rows) == 301


def test_traces_written():
    import io

    sc = replace(default_grid_scenario(rate=2), slot_count=20)
    routes, qs = io.StringIO(), io.StringIO()
    rec = Simulation(sc, route_trace=routes, queue_trace=qs).run()
    lines = routes.getvalue().splitlines()
    # one line per (slot, client) with arrivals, at most 20 * 4
    assert 0 < len(lines) <= 80 and rec.arrivals.sum() > 0
    for line in lines:
        rid, policy, weight, procs, paths = line.split(",")
        assert policy == "DI-DCNC" and len(procs.split("-")) == 2 and paths.count("|") == 4
    assert len(qs.getvalue().splitlines()) == 20 * (16 + 48)


def test_fixed_routes_hook():
    g = line_graph("sabd", sources={"k": {"b"}})
    client = ClientSpec("s", "d", service((1, 1, "k", 1)), 2)
    sc = Scenario(graph=g, clients=(client,), slot_count=2000)
    from didcnc.alg import EmbeddedRoute

    route = EmbeddedRoute(("a",), (("s", "a"),), (("b", "a"),), ("a", "b", "d"))
    sim = Simulation(sc, fixed_routes=lambda c, t: route, debug=True)
    rec = sim.run()
    assert sim.engine == "reference"
    assert sim.node_used[g.index["b"]] == 0
    assert rec.delays.min() >= 3


def _random_scenario(seed, n_clients):
    rng = random.Random(seed)
    graph, client, _ = random_instance(rng, max_nodes=5, max_stages=2)
    clients = [client]
    for _ in range(n_clients - 1):
        s, d = rng.choice(graph.nodes), rng.choice(graph.nodes)
        funcs = tuple(replace(f, object_name=rng.choice(sorted(graph.static_sources)))
                      for f in client.service.functions)
        clients.append(ClientSpec(s, d, client.service.__class__(funcs), 1))
    rate = rng.choice([Fraction(1, 2), 1, 2, 4])
    return Scenario(graph=graph, clients=tuple(replace(c, arrival_rate=rate) for c in clients),
                    slot_count=400, seed=seed)


@given(st.integers(0, 10**6), st.integers(1, 3))
@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_invariants_hold_on_random_scenarios(seed, n_clients):
    sc = _random_scenario(seed, n_clients)
    ref = Simulation(sc, debug=True, engine="reference", early_stop=False).run()
    fast = Simulation(sc, debug=True, engine="fast", early_stop=False).run()
    _metrics_equal(ref, fast)
    assert (ref.backlog >= 0).all()
    assert ref.checks > 0

import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from didcnc.alg import EmbeddedRoute, build_alg
from didcnc.control import Admission, VirtualQueueState, accumulate_loads, admit, update_virtual_queues
from didcnc.model import ClientSpec, Scenario, default_grid_scenario
from didcnc.oracle import brute_force_min_star
from didcnc.routing import Router

from conftest import bidirectional, line_graph, make_graph, queues, service


def _one_link(q, cap, load):
    g = make_graph("ij", [("i", "j")], proc=1, link=cap)
    state = queues(g, [0, 0], [q])
    new = update_virtual_queues(state, np.array([Fraction(0)] * 2, dtype=object),
                                np.array([Fraction(load)], dtype=object))
    return new.link_q[0]


@pytest.mark.parametrize("q,cap,load,expected", [(5, 3, 1, 3), (0, 3, 0, 0), (2, 5, 10, 7)])
def test_update_arithmetic(q, cap, load, expected):
    assert _one_link(q, cap, load) == expected


def test_update_float_matches_exact():
    g = line_graph("abc")
    exact = queues(g, [3, 0, 1], [4, 0, 2, 9])
    flt = queues(g, [3, 0, 1], [4, 0, 2, 9], exact=False)
    a_node, a_link = [Fraction(1, 2)] * 3, [Fraction(25)] * 4
    e = update_virtual_queues(exact, np.array(a_node, dtype=object), np.array(a_link, dtype=object))
    f = update_virtual_queues(flt, np.array(a_node, float), np.array(a_link, float))
    assert [float(x) for x in e.node_q] == list(f.node_q)
    assert [float(x) for x in e.link_q] == list(f.link_q)
    assert list(exact.link_q) == [4, 0, 2, 9]  # update returns a new state


def test_accumulate_two_clients_share_link():
    g = make_graph("ij", [("i", "j")], sources={"k": {"i"}})
    c1 = ClientSpec("i", "j", service((1, 0, "k", 0)), 1)  # live over (i,j): load 1
    c2 = ClientSpec("j", "j", service((1, 0, "k", 2)), 1)  # static over (i,j) with zeta = 2
    r1 = EmbeddedRoute(("j",), (("i", "j"),), (("i", "j"),), ("j",))
    r2 = EmbeddedRoute(("j",), (("j",),), (("i", "j"),), ("j",))
    a_node, a_link = accumulate_loads([Admission(0, r1, 4), Admission(1, r2, 5)], [c1, c2], g)
    assert a_link[0] == 1 * 4 + 2 * 5 == 14
    assert all(x == 0 for x in a_node)


def test_accumulate_single_and_empty():
    g = make_graph("ijd", [("i", "j"), ("j", "d")], sources={"k": {"j"}})
    c = ClientSpec("i", "d", service((2, 1, "k", 1)), 1)
    r = EmbeddedRoute(("i",), (("i",),), (("j",),), ("i",))
    a_node, a_link = accumulate_loads([], [c], g)
    assert not any(a_node) and not any(a_link)
    r = EmbeddedRoute(("j",), (("i", "j"),), (("j",),), ("j", "d"))
    a_node, a_link = accumulate_loads([Admission(0, r, 1)], [c], g)
    assert list(a_link) == [1, 2]
    assert a_node[g.index["j"]] == 1


def test_admit_binds_all_arrivals_to_one_route():
    sc = default_grid_scenario()
    router = Router(sc.graph, sc.clients)
    state = VirtualQueueState.for_scenario(sc)
    res = admit(sc.clients, [3, 0, 1, 0], router, state)
    assert [(a.client, a.count) for a in res.admissions] == [(0, 3), (2, 1)]
    assert res.failures == {}
    assert not admit(sc.clients, [0, 0, 0, 0], router, state).admissions


def test_admit_congested_line_matches_oracle():
    g = line_graph("sabd", sources={"k": {"b"}})
    client = ClientSpec("s", "d", service((2, 1, "k", 1)), 1)
    state = queues(g, [0, 40, 30, 0], [Fraction(k % 3) for k in range(len(g.links))])
    res = admit([client], [5], Router(g, [client]), state)
    (adm,) = res.admissions
    best, w = brute_force_min_star(build_alg(g, client.service), client, state)
    assert adm.route == best and adm.count == 5 and adm.weight == w


def test_admit_failure_counted():
    g = make_graph("uvx", [("u", "v"), ("v", "u")], sources={"k": {"v"}})
    client = ClientSpec("u", "x", service((1, 1, "k", 1)), 1)
    res = admit([client], [4], Router(g, [client]), queues(g))
    assert res.admissions == [] and res.failures == {0: 4}
    with pytest.raises(ValueError):
        admit([client], [1], Router(g, [client]), queues(g), policy="greedy")


@given(st.lists(st.integers(0, 200), min_size=4, max_size=4), st.lists(st.integers(0, 200), min_size=6, max_size=6))
@settings(max_examples=60, deadline=None)
def test_pure_drain(node_q, link_q):
    g = line_graph("abcd", cap=7, proc=3)
    state = queues(g, node_q, link_q)
    bound = max([math.ceil(Fraction(q, 3)) for q in node_q] + [math.ceil(Fraction(q, 7)) for q in link_q])
    zero_n = np.array([Fraction(0)] * 4, dtype=object)
    zero_l = np.array([Fraction(0)] * 6, dtype=object)
    for t in range(bound):
        prev = state
        state = update_virtual_queues(state, zero_n, zero_l)
        assert all(x >= 0 for x in state.node_q) and all(x >= 0 for x in state.link_q)
        # normalised values fall by exactly one slot unless they hit zero
        for a, b, c in zip(prev.link_q, state.link_q, state.link_cap):
            assert b / c == max(a / c - 1, 0)
    assert not any(state.node_q) and not any(state.link_q)


def test_conservation_over_slots():
    sc = default_grid_scenario(rate=6)
    router = Router(sc.graph, sc.clients)
    state = VirtualQueueState.for_scenario(sc)
    rng = np.random.default_rng(4)
    for _ in range(50):
        arrivals = rng.poisson(6, len(sc.clients))
        res = admit(sc.clients, arrivals, router, state)
        got = np.zeros(len(sc.clients), dtype=int)
        for a in res.admissions:
            got[a.client] += a.count
        assert np.array_equal(got, arrivals)
        state = update_virtual_queues(state, *accumulate_loads(res.admissions, sc.clients, sc.graph, exact=False))
        assert (state.node_q >= 0).all() and (state.link_q >= 0).all()


def test_queue_trace_rows():
    g = make_graph("ij", [("i", "j")], proc=2, link=4)
    rows = list(queues(g, [1, 0], [2]).trace_rows(9))
    assert rows == [(9, "i", 1.0, 0.5), (9, "j", 0.0, 0.0), (9, "i->j", 2.0, 0.5)]

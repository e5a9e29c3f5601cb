import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from didcnc.alg import (
    PROCESSING,
    STATIC_SOURCE,
    TRANSMISSION,
    AlgVertex,
    EmbeddedRoute,
    build_alg,
    edge_coefficient,
    edge_weight,
    expected_counts,
    load_weight,
    route_loads,
    route_weight,
    validate_route,
)
from didcnc.model import ClientSpec, ScenarioError, default_grid_scenario
from didcnc.oracle import enumerate_routes

from conftest import bidirectional, line_graph, make_graph, queues, random_instance, service


def _counts(alg):
    return {
        "vertices": len(alg.vertices),
        "transmission": len(alg.edges_of_kind(TRANSMISSION)),
        "processing": len(alg.edges_of_kind(PROCESSING)),
        "static-source": len(alg.edges_of_kind(STATIC_SOURCE)),
    }


def test_two_node_counts():
    g = make_graph("uv", [("u", "v")], sources={"k": {"v"}})
    alg = build_alg(g, service((1, 1, "k", 1)))
    assert _counts(alg) == {"vertices": 7, "transmission": 3, "processing": 4, "static-source": 1}
    names = sorted(str(v) for v in alg.vertices)
    assert names == sorted(["u_1", "v_1", "u'_1", "v'_1", "u_2", "v_2", "o''_1"])


def test_grid_m2_vertex_count():
    sc = default_grid_scenario()
    alg = build_alg(sc.graph, sc.clients[0].service)
    assert len(alg.vertices) == 82
    assert len(alg.edges_of_kind(PROCESSING)) == 2 * 16 * 2
    layers = {v.layer for v in alg.vertices if v.pipeline == 0}
    assert layers == {1, 2, 3}
    assert {v.pipeline for v in alg.vertices} == {0, 1, 2}


def test_super_source_only_in_static_pipelines():
    sc = default_grid_scenario()
    alg = build_alg(sc.graph, sc.clients[1].service)
    assert all(v.pipeline > 0 for v in alg.vertices if v.is_super_source)


@pytest.mark.parametrize("seed", range(30))
def test_counts_closed_form(seed):
    rng = random.Random(seed)
    graph, client, _ = random_instance(rng, max_nodes=6, max_stages=3)
    alg = build_alg(graph, client.service)
    per_stage = [len(graph.static_sources[f.object_name]) for f in client.service.functions]
    assert _counts(alg) == expected_counts(len(graph.nodes), len(graph.links), len(client.service), per_stage)


def test_missing_source_rejected():
    g = make_graph("uv", [("u", "v")], sources={"k": {"v"}})
    with pytest.raises(ScenarioError):
        build_alg(g, service((1, 1, "other", 1)))


def test_dot_output():
    g = make_graph("uv", [("u", "v")], sources={"k": {"v"}})
    dot = build_alg(g, service((1, 1, "k", 1))).to_dot()
    assert dot.startswith("digraph alg {")
    assert dot.count("->") == 3 + 4 + 1
    assert "style=dashed" in dot


def _star(g_service, s="s", p="b", d="d"):
    return EmbeddedRoute((p,), ((s, "a", "b"),), (("b",),), ("b", d))


def test_output_edge_weight_scaled_by_xi():
    g = line_graph("sabd", sources={"k": {"b"}})
    svc = service((2, 1, "k", 1))
    alg = build_alg(g, svc)
    q = queues(g, link_q=[Fraction(k + 1) for k in range(len(g.links))])
    for e in alg.edges_of_kind(TRANSMISSION):
        if e.tail.pipeline == 0 and e.tail.layer == 2:
            assert edge_weight(e, svc, q) == 2 * q.link_weight(e.underlying)
        if e.tail.pipeline == 0 and e.tail.layer == 1:
            assert edge_weight(e, svc, q) == q.link_weight(e.underlying)
    for e in alg.edges_of_kind(STATIC_SOURCE):
        assert edge_weight(e, svc, q) == 0


def test_stage_two_coefficient_is_first_xi():
    g = line_graph("sabd", sources={"k": {"b"}, "j": {"a"}})
    svc = service(("1/2", 1, "k", 3), (3, 2, "j", 1))
    alg = build_alg(g, svc)
    live2 = next(e for e in alg.edges if e.kind == TRANSMISSION and e.tail.pipeline == 0 and e.tail.layer == 2)
    assert edge_coefficient(live2, svc) == Fraction(1, 2)
    static2 = next(e for e in alg.edges if e.kind == TRANSMISSION and e.tail.pipeline == 2)
    assert edge_coefficient(static2, svc) == Fraction(1, 2)
    proc2 = next(e for e in alg.edges if e.kind == PROCESSING and e.stage == 2 and e.tail.pipeline == 0)
    assert edge_coefficient(proc2, svc) == 1
    out = next(e for e in alg.edges if e.kind == TRANSMISSION and e.tail.layer == 3)
    assert edge_coefficient(out, svc) == Fraction(3, 2)
    static_proc = next(e for e in alg.edges if e.kind == PROCESSING and e.tail.pipeline == 1)
    assert edge_coefficient(static_proc, svc) == 0


def test_zero_queues_zero_weights():
    sc = default_grid_scenario()
    svc = sc.clients[3].service
    alg = build_alg(sc.graph, svc)
    q = queues(sc.graph)
    assert all(edge_weight(e, svc, q) == 0 for e in alg.edges)


def test_route_loads_indicators():
    g = make_graph("ijp", bidirectional([("i", "j"), ("j", "p")]), sources={"k": {"p"}})
    svc = service((2, "1/2", "k", 1))
    # live i->j->p, output p->j->i: link (i,j) carries live only, (j,i) output only
    route = EmbeddedRoute(("p",), (("i", "j", "p"),), (("p",),), ("p", "j", "i"))
    ld = route_loads(route, svc)
    assert ld.node_load == {"p": Fraction(1, 2)}
    assert ld.link_load[("i", "j")] == 1
    assert ld.link_load[("j", "i")] == 2
    # live and output both on (i,j): 1 + 0 + 2 = 3
    g2 = make_graph("ij", bidirectional([("i", "j")]), sources={"k": {"i"}})
    route2 = EmbeddedRoute(("j",), (("i", "j"),), (("i", "j"),), ("j",))
    assert route_loads(route2, service((2, 1, "k", 0))).link_load[("i", "j")] == 1
    route3 = EmbeddedRoute(("j",), (("i", "j"),), (("j",),), ("j",))
    svc3 = service((2, 1, "k", 1))
    assert validate_route(route3, build_alg(g2, svc3)) != []  # j does not cache k
    g3 = make_graph("ijd", [("i", "j"), ("j", "d"), ("d", "i")], sources={"k": {"j"}})
    route4 = EmbeddedRoute(("i",), (("i",),), (("j", "d", "i"),), ("i", "j", "d"))
    ld4 = route_loads(route4, svc3)
    assert ld4.link_load[("i", "j")] == 2 and ld4.link_load[("j", "d")] == 3


def test_route_loads_stage_mismatch():
    svc = service((1, 1, "k", 1), (1, 1, "k", 1))
    with pytest.raises(ValueError):
        route_loads(EmbeddedRoute(("a",), (("a",),), (("a",),), ("a",)), svc)


@pytest.mark.parametrize("seed", range(25))
def test_weight_load_identity_exhaustive(seed):
    rng = random.Random(1000 + seed)
    graph, client, state = random_instance(rng, max_nodes=4, max_stages=2)
    alg = build_alg(graph, client.service)
    routes = enumerate_routes(alg, client)
    for r in routes:
        assert validate_route(r, alg, client.source, client.destination) == []
        assert route_weight(r, client.service, state) == load_weight(route_loads(r, client.service), state)


def test_validate_fig2_shape():
    g = line_graph("svpd", sources={"k": {"v"}})
    alg = build_alg(g, service((1, 1, "k", 1)))
    route = EmbeddedRoute(("p",), (("s", "v", "p"),), (("v", "p"),), ("p", "d"))
    assert validate_route(route, alg, "s", "d") == []


def test_validate_merging_violation():
    g = line_graph("svpd", sources={"k": {"v"}})
    alg = build_alg(g, service((1, 1, "k", 1)))
    route = EmbeddedRoute(("p",), (("s", "v", "p"),), (("v",),), ("p", "d"))
    problems = validate_route(route, alg)
    assert any(p.startswith("merging") for p in problems)


def test_validate_acyclic_violation():
    g = line_graph("svpd", sources={"k": {"v"}})
    alg = build_alg(g, service((1, 1, "k", 1)))
    route = EmbeddedRoute(("p",), (("s", "v", "s", "v", "p"),), (("v", "p"),), ("p", "d"))
    assert any(p.startswith("acyclic") for p in validate_route(route, alg))


def test_validate_wrong_source_and_missing_link():
    g = line_graph("svpd", sources={"k": {"v"}})
    alg = build_alg(g, service((1, 1, "k", 1)))
    route = EmbeddedRoute(("p",), (("s", "p"),), (("s", "v", "p"),), ("p", "d"))
    problems = validate_route(route, alg)
    assert any(p.startswith("static-source") for p in problems)
    assert any("missing link" in p for p in problems)
    bad_dest = EmbeddedRoute(("p",), (("s", "v", "p"),), (("v", "p"),), ("p",))
    assert any("not 'd'" in p for p in validate_route(bad_dest, alg, "s", "d"))


def test_route_edges_and_count():
    route = EmbeddedRoute(("p",), (("s", "v", "p"),), (("v", "p"),), ("p", "d"))
    edges = route.alg_edges()
    assert len(edges) == route.edge_count == 2 + 1 + 1 + 2 + 1
    assert route.cache_selection == ("v",)
    assert edges[2].kind == STATIC_SOURCE and edges[2].tail == AlgVertex("o'", 1, 1)
    line = route.trace_line(7, "DI-DCNC", Fraction(1, 4))
    assert line == "7,DI-DCNC,0.25,p,s-v-p|v-p|p-d"


@given(st.lists(st.integers(0, 30), min_size=6, max_size=6), st.lists(st.integers(0, 9), min_size=4, max_size=4))
@settings(max_examples=60, deadline=None)
def test_weights_non_negative(link_q, node_q):
    g = make_graph("abcd", bidirectional([("a", "b"), ("b", "c"), ("c", "d")]), sources={"k": {"c"}})
    svc = service(("1/2", "3/2", "k", 2))
    q = queues(g, node_q, link_q)
    alg = build_alg(g, svc)
    assert all(edge_weight(e, svc, q) >= 0 for e in alg.edges)

"""Shared builders for small networks, random instances and solver wrappers."""
from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from didcnc.control import VirtualQueueState
from didcnc.model import ClientSpec, FunctionSpec, NetworkGraph, Scenario, ServiceSpec
from didcnc.oracle import LPResult


def make_graph(nodes, links, proc=10, link=20, sources=None) -> NetworkGraph:
    nodes = tuple(nodes)
    links = tuple(links)
    proc_cap = proc if isinstance(proc, dict) else {n: Fraction(proc) for n in nodes}
    link_cap = link if isinstance(link, dict) else {l: Fraction(link) for l in links}
    return NetworkGraph(nodes, links, proc_cap, link_cap, sources or {})


def bidirectional(pairs):
    out = []
    for a, b in pairs:
        out += [(a, b), (b, a)]
    return out


def service(*funcs) -> ServiceSpec:
    """``funcs`` are (xi, r, database, zeta) tuples."""
    return ServiceSpec(tuple(FunctionSpec(Fraction(x), Fraction(r), k, z) for x, r, k, z in funcs))


def line_graph(names="sabd", cap=20, proc=10, sources=None) -> NetworkGraph:
    names = tuple(names)
    return make_graph(names, bidirectional(zip(names, names[1:])), proc=proc, link=cap, sources=sources)


def queues(graph, node_q=None, link_q=None, exact=True) -> VirtualQueueState:
    return VirtualQueueState(graph, [graph.proc_capacity[n] for n in graph.nodes],
                             [graph.link_capacity[l] for l in graph.links], node_q, link_q, exact=exact)


def random_instance(rng: random.Random, max_nodes=5, max_stages=2, queue_zero_prob=0.2):
    """Random connected graph, service and exact queue state (all small integers/rationals)."""
    n = rng.randint(2, max_nodes)
    names = [chr(ord("a") + i) for i in range(n)]
    pairs = set()
    order = names[:]
    rng.shuffle(order)
    for i in range(1, n):  # random spanning tree keeps it connected
        pairs.add(tuple(sorted((order[i], order[rng.randrange(i)]))))
    for a in names:
        for b in names:
            if a < b and rng.random() < 0.3:
                pairs.add((a, b))
    links = []
    for a, b in sorted(pairs):
        if rng.random() < 0.85:
            links += [(a, b), (b, a)]
        else:
            links.append((a, b) if rng.random() < 0.5 else (b, a))
    M = rng.randint(1, max_stages)
    dbs = [f"k{m}" for m in range(M)]
    sources = {k: frozenset(rng.sample(names, rng.randint(1, min(2, n)))) for k in dbs}
    funcs = [(Fraction(rng.choice([1, 2, 3])) / rng.choice([1, 2]), Fraction(rng.randint(0, 4), 2), dbs[m],
              rng.randint(0, 2)) for m in range(M)]
    graph = make_graph(names, links, proc={v: Fraction(rng.randint(1, 5)) for v in names},
                       link={l: Fraction(rng.randint(1, 5)) for l in links}, sources=sources)
    s, d = rng.choice(names), rng.choice(names)
    client = ClientSpec(s, d, service(*funcs), Fraction(1))

    def q():
        return Fraction(0) if rng.random() < queue_zero_prob else Fraction(rng.randint(0, 12), rng.randint(1, 3))

    state = queues(graph, [q() for _ in graph.nodes], [q() for _ in graph.links])
    return graph, client, state


def highs_solver(c, A_ub, b_ub, A_eq, b_eq):
    """linprog_dense-compatible wrapper around scipy's HiGHS (test-only cross-check)."""
    from scipy.optimize import linprog

    A_ub = np.asarray(A_ub, dtype=float) if len(b_ub) else None
    A_eq = np.asarray(A_eq, dtype=float) if len(b_eq) else None
    res = linprog(np.asarray(c, float), A_ub=A_ub, b_ub=np.asarray(b_ub, float) if A_ub is not None else None,
                  A_eq=A_eq, b_eq=np.asarray(b_eq, float) if A_eq is not None else None, bounds=(0, None),
                  method="highs")
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
    return LPResult(status, res.x, res.fun, res.nit)


def single_client_scenario(graph, client, **kw) -> Scenario:
    return Scenario(graph=graph, clients=(client,), **kw)


@pytest.fixture
def rng():
    return random.Random(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

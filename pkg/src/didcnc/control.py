"""Virtual queues and the per-slot admission step.

The virtual system charges each admitted request its full route load at
once; its queues evolve as ``Q~(t+1) = [Q~(t) - C + a~(t)]^+`` with the
effective (alpha-scaled) capacities.  Route selection always reads the
snapshot taken before the update of the same slot.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .alg import EmbeddedRoute, route_loads
from .model import NetworkGraph, Scenario, POLICIES


def _object_array(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        out[i] = v
    return out


class VirtualQueueState:
    """Q~ per node (processing units) and per link (packets).

    Arrays follow ``graph.nodes`` and ``graph.links`` order.  With
    ``exact=True`` everything is held as Fractions in object arrays.
    """

    def __init__(self, graph: NetworkGraph, node_cap, link_cap, node_q=None, link_q=None, exact: bool = False):
        self.graph = graph
        self.exact = exact
        self._node_pos = graph.index
        self._link_pos = {l: k for k, l in enumerate(graph.links)}
        conv = (lambda v: _object_array([Fraction(x) for x in v])) if exact else (lambda v: np.asarray(v, float).copy())
        self.node_cap = conv(node_cap)
        self.link_cap = conv(link_cap)
        zeros = [0] * len(graph.nodes), [0] * len(graph.links)
        self.node_q = conv(zeros[0] if node_q is None else node_q)
        self.link_q = conv(zeros[1] if link_q is None else link_q)
        if np.any(self.node_cap <= 0) or np.any(self.link_cap <= 0):
            raise ValueError("capacities must be positive")

    @classmethod
    def for_scenario(cls, scenario: Scenario, exact: bool = False) -> "VirtualQueueState":
        """Empty queues (Q~(0) = 0) with the scenario's effective capacities."""
        g = scenario.graph
        node_cap = [scenario.effective_proc_capacity(n) for n in g.nodes]
        link_cap = [scenario.effective_link_capacity(l) for l in g.links]
        return cls(g, node_cap, link_cap, exact=exact)

    def copy(self) -> "VirtualQueueState":
        return VirtualQueueState(self.graph, self.node_cap, self.link_cap, self.node_q, self.link_q, self.exact)

    # normalised values Q = Q~/C (slots of virtual delay)
    def node_delay(self, node):
        k = self._node_pos[node]
        return self.node_q[k] / self.node_cap[k]

    def link_delay(self, link):
        k = self._link_pos[tuple(link)]
        return self.link_q[k] / self.link_cap[k]

    # drift weights per unit of load: Q/C = Q~/C^2
    def node_weight(self, node):
        k = self._node_pos[node]
        return self.node_q[k] / (self.node_cap[k] * self.node_cap[k])

    def link_weight(self, link):
        k = self._link_pos[tuple(link)]
        return self.link_q[k] / (self.link_cap[k] * self.link_cap[k])

    def weight_arrays(self):
        """(per-node, per-link) arrays of Q~/C^2, the router's input."""
        return self.node_q / (self.node_cap * self.node_cap), self.link_q / (self.link_cap * self.link_cap)

    def trace_rows(self, slot: int):
        """CSV rows ``slot, entity, Q~, Q`` for the verbose queue trace."""
        for n, q, c in zip(self.graph.nodes, self.node_q, self.node_cap):
            yield slot, n, float(q), float(q / c)
        for (i, j), q, c in zip(self.graph.links, self.link_q, self.link_cap):
            yield slot, f"{i}->{j}", float(q), float(q / c)


@dataclass(frozen=True)
class Admission:
    client: int
    route: EmbeddedRoute
    count: int
    weight: object = None


@dataclass
class AdmissionResult:
    admissions: list
    failures: dict  # client index -> dropped request count


def accumulate_loads(admissions, clients, graph: NetworkGraph, exact: bool = True):
    """a~_i and a~_ij: route loads weighted by admitted counts."""
    node_pos = graph.index
    link_pos = {l: k for k, l in enumerate(graph.links)}
    if exact:
        a_node = _object_array([Fraction(0)] * len(graph.nodes))
        a_link = _object_array([Fraction(0)] * len(graph.links))
    else:
        a_node = np.zeros(len(graph.nodes))
        a_link = np.zeros(len(graph.links))
    for adm in admissions:
        if adm.count == 0:
            continue
        loads = route_loads(adm.route, clients[adm.client].service)
        for node, rho in loads.node_load.items():
            a_node[node_pos[node]] += rho * adm.count if exact else float(rho) * adm.count
        for link, rho in loads.link_load.items():
            a_link[link_pos[link]] += rho * adm.count if exact else float(rho) * adm.count
    return a_node, a_link


def update_virtual_queues(state: VirtualQueueState, node_loads, link_loads) -> VirtualQueueState:
    """One slot of the virtual dynamics; returns a new state."""
    new = state.copy()
    node_q = state.node_q - state.node_cap + node_loads
    link_q = state.link_q - state.link_cap + link_loads
    if state.exact:
        new.node_q = _object_array([max(Fraction(x), Fraction(0)) for x in node_q])
        new.link_q = _object_array([max(Fraction(x), Fraction(0)) for x in link_q])
    else:
        new.node_q = np.maximum(node_q, 0.0)
        new.link_q = np.maximum(link_q, 0.0)
    return new


def admit(clients, arrivals, router, state: VirtualQueueState, policy: str = "DI-DCNC") -> AdmissionResult:
    """Bind every arrival of a client to the one route its policy picks this slot.

    ``router`` is a :class:`didcnc.routing.Router` built for ``clients``.
    Clients without a finite-weight route lose their arrivals (counted in
    ``failures``).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    active = [c for c, a in enumerate(arrivals) if a > 0]
    out, failures = [], {}
    if not active:
        return AdmissionResult(out, failures)
    node_w, link_w = state.weight_arrays()
    for c, res in zip(active, router.select(node_w, link_w, policy, which=active)):
        if res is None:
            failures[c] = failures.get(c, 0) + int(arrivals[c])
            continue
        route, weight = res
        out.append(Admission(c, route, int(arrivals[c]), weight))
    return AdmissionResult(out, failures)


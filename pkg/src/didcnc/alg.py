"""Augmented layered graph (ALG), embedded routes, drift weights and loads.

Layout for a service with M functions:

* the live/output chain has layers 1..M+1; layer m carries the live input of
  function m and layer M+1 carries the final output;
* static pipeline m (m = 1..M) is a copy of the network plus a super source
  ``o'_m`` wired to every cache of database ``k_m``;
* processing edges go from ``i`` in layer m and from ``i'`` in static
  pipeline m to ``i`` in layer m+1.

Vertices use pipeline 0 for the live/output chain and pipeline m for the
static pipeline of stage m.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .model import NetworkGraph, ServiceSpec, ScenarioError

SUPER_SOURCE = "o'"
LIVE = 0

TRANSMISSION = "transmission"
PROCESSING = "processing"
STATIC_SOURCE = "static-source"


class AlgVertex(NamedTuple):
    base_node: str
    layer: int
    pipeline: int  # 0 = live/output chain, m = static pipeline of stage m

    @property
    def is_super_source(self) -> bool:
        return self.base_node == SUPER_SOURCE

    def __str__(self) -> str:
        if self.pipeline == LIVE:
            return f"{self.base_node}_{self.layer}"
        return f"{self.base_node}'_{self.pipeline}"


class AlgEdge(NamedTuple):
    tail: AlgVertex
    head: AlgVertex
    kind: str
    underlying: object  # (i, j) for transmission, i for processing, None for static-source
    stage: int  # live layer / static stage the edge belongs to


class AugmentedLayeredGraph:
    """The ALG of one service over one network."""

    def __init__(self, graph: NetworkGraph, service: ServiceSpec):
        self.graph = graph
        self.service = service
        self.stages = len(service)
        self.vertices: list[AlgVertex] = []
        self.edges: list[AlgEdge] = []
        self._build()
        self.out_edges: dict[AlgVertex, list[AlgEdge]] = {v: [] for v in self.vertices}
        self.in_edges: dict[AlgVertex, list[AlgEdge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            self.out_edges[e.tail].append(e)
            self.in_edges[e.head].append(e)

    def _build(self) -> None:
        g, M = self.graph, self.stages
        for layer in range(1, M + 2):
            self.vertices += [AlgVertex(n, layer, LIVE) for n in g.nodes]
        for m in range(1, M + 1):
            self.vertices += [AlgVertex(n, m, m) for n in g.nodes]
            self.vertices.append(AlgVertex(SUPER_SOURCE, m, m))

        for layer in range(1, M + 2):
            for i, j in g.links:
                self.edges.append(
                    AlgEdge(AlgVertex(i, layer, LIVE), AlgVertex(j, layer, LIVE), TRANSMISSION, (i, j), layer)
                )
        for m in range(1, M + 1):
            for i, j in g.links:
                self.edges.append(AlgEdge(AlgVertex(i, m, m), AlgVertex(j, m, m), TRANSMISSION, (i, j), m))
        for m in range(1, M + 1):
            for i in g.nodes:
                head = AlgVertex(i, m + 1, LIVE)
                self.edges.append(AlgEdge(AlgVertex(i, m, LIVE), head, PROCESSING, i, m))
                self.edges.append(AlgEdge(AlgVertex(i, m, m), head, PROCESSING, i, m))
        for m, f in enumerate(self.service.functions, start=1):
            hosts = g.static_sources.get(f.object_name, ())
            if not hosts:
                raise ScenarioError(f"database {f.object_name!r} has no static source", "databases")
            for v in sorted(hosts, key=g.index.__getitem__):
                self.edges.append(
                    AlgEdge(AlgVertex(SUPER_SOURCE, m, m), AlgVertex(v, m, m), STATIC_SOURCE, None, m)
                )

    def edges_of_kind(self, kind: str) -> list[AlgEdge]:
        return [e for e in self.edges if e.kind == kind]

    def super_source(self, m: int) -> AlgVertex:
        return AlgVertex(SUPER_SOURCE, m, m)

    def to_dot(self) -> str:
        """Graphviz DOT text, one cluster per pipeline (for eyeballing)."""
        lines = ["digraph alg {", "  rankdir=LR;"]
        clusters: dict[tuple, list[AlgVertex]] = {}
        for v in self.vertices:
            key = ("live", v.layer) if v.pipeline == LIVE else ("static", v.pipeline)
            clusters.setdefault(key, []).append(v)
        for n, (key, vs) in enumerate(sorted(clusters.items())):
            lines.append(f'  subgraph cluster_{n} {{ label="{key[0]} {key[1]}";')
            for v in vs:
                lines.append(f'    "{v}";')
            lines.append("  }")
        style = {TRANSMISSION: "solid", PROCESSING: "bold", STATIC_SOURCE: "dashed"}
        for e in self.edges:
            lines.append(f'  "{e.tail}" -> "{e.head}" [style={style[e.kind]}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_alg(graph: NetworkGraph, service: ServiceSpec) -> AugmentedLayeredGraph:
    return AugmentedLayeredGraph(graph, service)


def expected_counts(n_nodes: int, n_links: int, stages: int, sources_per_stage) -> dict[str, int]:
    """Closed-form vertex/edge counts of the ALG."""
    return {
        "vertices": n_nodes * (2 * stages + 1) + stages,
        "transmission": n_links * (2 * stages + 1),
        "processing": 2 * n_nodes * stages,
        "static-source": sum(sources_per_stage),
    }


# ---------------------------------------------------------------------------
# embedded routes


@dataclass(frozen=True)
class EmbeddedRoute:
    """One request's delivery plan: a STAR for M = 1, a chain of them for M > 1.

    ``live_paths[m]`` runs from the source (m = 0) or the previous processing
    location to ``processing[m]``; ``static_paths[m]`` starts at the selected
    cache and ends at ``processing[m]``; ``output_path`` runs from the last
    processing location to the destination.  Paths are node-id tuples and a
    path of length one means "already there".
    """

    processing: tuple[str, ...]
    live_paths: tuple[tuple[str, ...], ...]
    static_paths: tuple[tuple[str, ...], ...]
    output_path: tuple[str, ...]

    @property
    def stages(self) -> int:
        return len(self.processing)

    @property
    def cache_selection(self) -> tuple[str, ...]:
        return tuple(p[0] for p in self.static_paths)

    def alg_edges(self) -> list[AlgEdge]:
        """ALG edges of the route, in crossing order per stage."""
        out = []
        for m in range(1, self.stages + 1):
            live, static, p = self.live_paths[m - 1], self.static_paths[m - 1], self.processing[m - 1]
            out += [
                AlgEdge(AlgVertex(i, m, LIVE), AlgVertex(j, m, LIVE), TRANSMISSION, (i, j), m)
                for i, j in zip(live, live[1:])
            ]
            out.append(AlgEdge(AlgVertex(SUPER_SOURCE, m, m), AlgVertex(static[0], m, m), STATIC_SOURCE, None, m))
            out += [
                AlgEdge(AlgVertex(i, m, m), AlgVertex(j, m, m), TRANSMISSION, (i, j), m)
                for i, j in zip(static, static[1:])
            ]
            out.append(AlgEdge(AlgVertex(p, m, LIVE), AlgVertex(p, m + 1, LIVE), PROCESSING, p, m))
            out.append(AlgEdge(AlgVertex(p, m, m), AlgVertex(p, m + 1, LIVE), PROCESSING, p, m))
        M1 = self.stages + 1
        out += [
            AlgEdge(AlgVertex(i, M1, LIVE), AlgVertex(j, M1, LIVE), TRANSMISSION, (i, j), M1)
            for i, j in zip(self.output_path, self.output_path[1:])
        ]
        return out

    @property
    def edge_count(self) -> int:
        hops = sum(len(p) - 1 for p in self.live_paths) + sum(len(p) - 1 for p in self.static_paths)
        return hops + len(self.output_path) - 1 + 3 * self.stages

    def path_sequence(self) -> tuple[tuple[str, ...], ...]:
        """Paths in tie-break order: live_1, static_1, ..., live_M, static_M, output."""
        seq = []
        for live, static in zip(self.live_paths, self.static_paths):
            seq += [live, static]
        seq.append(self.output_path)
        return tuple(seq)

    def tie_key(self, weight, index: dict[str, int]):
        """Total order used by every route selector in the package."""
        paths = tuple(tuple(index[n] for n in p) for p in self.path_sequence())
        return (weight, self.edge_count, tuple(index[p] for p in self.processing), paths)

    def trace_line(self, request_id, policy: str, weight) -> str:
        seqs = "|".join("-".join(p) for p in self.path_sequence())
        return f"{request_id},{policy},{float(weight):.6g},{'-'.join(self.processing)},{seqs}"


@dataclass(frozen=True)
class LoadVector:
    node_load: dict
    link_load: dict


def route_loads(route: EmbeddedRoute, service: ServiceSpec) -> LoadVector:
    """Per-request processing and transmission loads of a route."""
    if route.stages != len(service):
        raise ValueError(f"route has {route.stages} stages, service has {len(service)}")
    kappa = service.stage_coefficients()
    nodes: dict[str, Fraction] = {}
    links: dict[tuple[str, str], Fraction] = {}

    def add_path(path, coef):
        for link in zip(path, path[1:]):
            links[link] = links.get(link, Fraction(0)) + coef

    for m, f in enumerate(service.functions):
        p = route.processing[m]
        nodes[p] = nodes.get(p, Fraction(0)) + f.workload * kappa[m]
        add_path(route.live_paths[m], kappa[m])
        add_path(route.static_paths[m], f.merging_ratio * kappa[m])
    add_path(route.output_path, kappa[-1])
    return LoadVector(nodes, links)


def edge_coefficient(edge: AlgEdge, service: ServiceSpec, kappa=None):
    """Multiplier on Q/C for an ALG edge's drift weight (per input request)."""
    if kappa is None:
        kappa = service.stage_coefficients()
    if edge.kind == STATIC_SOURCE:
        return Fraction(0)
    if edge.kind == PROCESSING:
        if edge.tail.pipeline != LIVE:
            return Fraction(0)
        return service.functions[edge.stage - 1].workload * kappa[edge.stage - 1]
    if edge.tail.pipeline == LIVE:
        return kappa[edge.tail.layer - 1]
    m = edge.tail.pipeline
    return service.functions[m - 1].merging_ratio * kappa[m - 1]


def edge_weight(edge: AlgEdge, service: ServiceSpec, queues, kappa=None):
    """Drift weight of an ALG edge under a virtual-queue snapshot.

    ``queues`` must offer ``node_weight(i)`` = Q_i / C_i and
    ``link_weight((i, j))`` = Q_ij / C_ij, with Q the normalised queues.
    """
    coef = edge_coefficient(edge, service, kappa)
    if coef == 0:
        return coef * 0
    if edge.kind == PROCESSING:
        return coef * queues.node_weight(edge.underlying)
    return coef * queues.link_weight(edge.underlying)


def route_weight(route: EmbeddedRoute, service: ServiceSpec, queues):
    """Sum of ALG edge weights along the route."""
    kappa = service.stage_coefficients()
    total = 0
    for e in route.alg_edges():
        total = total + edge_weight(e, service, queues, kappa)
    return total


def load_weight(loads: LoadVector, queues):
    """sum_i rho_i Q_i/C_i + sum_ij rho_ij Q_ij/C_ij."""
    total = 0
    for i, rho in loads.node_load.items():
        total = total + rho * queues.node_weight(i)
    for link, rho in loads.link_load.items():
        total = total + rho * queues.link_weight(link)
    return total


# ---------------------------------------------------------------------------
# validation


def validate_route(route: EmbeddedRoute, alg: AugmentedLayeredGraph, source=None, destination=None) -> list[str]:
    """Unit-flow check of a route against the ALG; returns named violations.

    An empty list means the route is valid.  ``source``/``destination``
    additionally pin the end points of the live and output chain.
    """
    g, service = alg.graph, alg.service
    problems: list[str] = []
    links = set(g.links)
    nodes = set(g.nodes)
    M = alg.stages
    if not (len(route.processing) == len(route.live_paths) == len(route.static_paths) == M):
        return [f"stages: route has {len(route.processing)} processing locations, service needs {M}"]

    def check_path(name, path):
        if not path:
            problems.append(f"disconnected: {name} is empty")
            return
        for n in path:
            if n not in nodes:
                problems.append(f"disconnected: {name} visits unknown node {n!r}")
                return
        if len(set(path)) != len(path):
            problems.append(f"acyclic: {name} repeats a node {path}")
        for link in zip(path, path[1:]):
            if link not in links:
                problems.append(f"disconnected: {name} uses missing link {link}")

    for m in range(M):
        live = route.live_paths[m]
        check_path(f"live path {m + 1}", live)
        check_path(f"static path {m + 1}", route.static_paths[m])
        p = route.processing[m]
        if live and live[-1] != p:
            problems.append(f"disconnected: live path {m + 1} ends at {live[-1]!r}, not at {p!r}")
        if m > 0 and live and live[0] != route.processing[m - 1]:
            problems.append(f"disconnected: live path {m + 1} does not start at stage {m} processing node")
        static = route.static_paths[m]
        if static and static[-1] != p:
            problems.append(
                f"merging: static path {m + 1} ends at {static[-1]!r} but processing happens at {p!r}"
            )
        hosts = g.static_sources.get(service.functions[m].object_name, frozenset())
        if static and static[0] not in hosts:
            problems.append(f"static-source: {static[0]!r} does not cache database {service.functions[m].object_name!r}")
    check_path("output path", route.output_path)
    if route.output_path and route.output_path[0] != route.processing[-1]:
        problems.append("disconnected: output path does not start at the last processing node")
    if source is not None and route.live_paths[0] and route.live_paths[0][0] != source:
        problems.append(f"disconnected: live path starts at {route.live_paths[0][0]!r}, not source {source!r}")
    if destination is not None and route.output_path and route.output_path[-1] != destination:
        problems.append(f"disconnected: output path ends at {route.output_path[-1]!r}, not {destination!r}")
    return problems

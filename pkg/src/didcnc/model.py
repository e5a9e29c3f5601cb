"""Network, service and client model plus scenario files.

All numeric parameters are kept as :class:`fractions.Fraction` so that the
route-selection code can be run in exact arithmetic; the simulator converts
them to floats once, at start-up.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import jsonschema
import numpy as np

POLICIES = ("DI-DCNC", "S2L", "L2S")


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario descriptions."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def as_fraction(value) -> Fraction:
    """Parse ints, floats, Fractions and ``"p/q"`` strings into a Fraction.

    Floats go through their shortest decimal repr so ``0.2`` becomes 1/5.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.replace(" ", ""))
    raise TypeError(f"cannot interpret {value!r} as a number")


def _dump_number(x: Fraction):
    if x.denominator == 1:
        return int(x.numerator)
    f = float(x)
    if Fraction(repr(f)) == x:
        return f
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class NetworkGraph:
    """Directed network with processing, transmission and cache data.

    ``nodes`` is kept sorted; the position of a node in that tuple is its
    index everywhere else in the package (tie-breaks use it as well).
    """

    nodes: tuple[str, ...]
    links: tuple[tuple[str, str], ...]
    proc_capacity: Mapping[str, Fraction]
    link_capacity: Mapping[tuple[str, str], Fraction]
    static_sources: Mapping[str, frozenset[str]]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes)))
        order = {n: i for i, n in enumerate(self.nodes)}
        links = sorted(tuple(l) for l in self.links)
        links.sort(key=lambda l: (order.get(l[0], -1), order.get(l[1], -1)))
        object.__setattr__(self, "links", tuple(links))
        object.__setattr__(self, "proc_capacity", MappingProxyType(dict(self.proc_capacity)))
        object.__setattr__(self, "link_capacity", MappingProxyType(dict(self.link_capacity)))
        object.__setattr__(
            self,
            "static_sources",
            MappingProxyType({k: frozenset(v) for k, v in self.static_sources.items()}),
        )
        self._validate()

    def _validate(self) -> None:
        nodes = set(self.nodes)
        if len(nodes) != len(self.nodes):
            raise ScenarioError("duplicate node id", "nodes")
        if len(set(self.links)) != len(self.links):
            raise ScenarioError("duplicate link", "links")
        for i, j in self.links:
            for end in (i, j):
                if end not in nodes:
                    raise ScenarioError(f"link ({i}, {j}) references unknown node {end!r}", "links")
            if i == j:
                raise ScenarioError(f"self-loop on node {i!r}", "links")
        for n in self.nodes:
            c = self.proc_capacity.get(n)
            if c is None or c <= 0:
                raise ScenarioError(f"node {n!r} needs a positive capacity, got {c}", "nodes.capacity")
        for link in self.links:
            c = self.link_capacity.get(link)
            if c is None or c <= 0:
                raise ScenarioError(f"link {link} needs a positive capacity, got {c}", "links.capacity")
        for k, hosts in self.static_sources.items():
            for h in hosts:
                if h not in nodes:
                    raise ScenarioError(f"database {k!r} cached at unknown node {h!r}", "databases")

    @property
    def index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def out_neighbors(self, node: str) -> list[str]:
        return [j for i, j in self.links if i == node]

    def hop_distances(self, root: str) -> dict[str, int]:
        """BFS hop counts from ``root`` along outgoing links."""
        dist = {root: 0}
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for i, j in self.links:
            adj[i].append(j)
        frontier = deque([root])
        while frontier:
            u = frontier.popleft()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    frontier.append(v)
        return dist


@dataclass(frozen=True)
class FunctionSpec:
    scaling_factor: Fraction  # xi: output packets per input live packet
    workload: Fraction  # r: processing units per input live packet
    object_name: str  # k: database id
    merging_ratio: int  # zeta: static packets per input live packet

    def __post_init__(self):
        object.__setattr__(self, "scaling_factor", as_fraction(self.scaling_factor))
        object.__setattr__(self, "workload", as_fraction(self.workload))
        if isinstance(self.merging_ratio, bool) or int(self.merging_ratio) != self.merging_ratio:
            raise ScenarioError(f"merging ratio must be an integer, got {self.merging_ratio!r}", "merging")
        object.__setattr__(self, "merging_ratio", int(self.merging_ratio))
        if self.scaling_factor <= 0:
            raise ScenarioError("scaling factor must be positive", "scaling")
        if self.workload < 0:
            raise ScenarioError("workload must be non-negative", "workload")
        if self.merging_ratio < 0:
            raise ScenarioError("merging ratio must be non-negative", "merging")


@dataclass(frozen=True)
class ServiceSpec:
    functions: tuple[FunctionSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.functions:
            raise ScenarioError("a service needs at least one function", "service")

    def __len__(self) -> int:
        return len(self.functions)

    def stage_coefficients(self) -> list[Fraction]:
        """kappa_m = prod of scaling factors of the stages before m, m = 1..M+1."""
        out = [Fraction(1)]
        for f in self.functions:
            out.append(out[-1] * f.scaling_factor)
        return out


@dataclass(frozen=True)
class ClientSpec:
    source: str
    destination: str
    service: ServiceSpec
    arrival_rate: Fraction

    def __post_init__(self):
        object.__setattr__(self, "arrival_rate", as_fraction(self.arrival_rate))
        if self.arrival_rate < 0:
            raise ScenarioError("arrival rate must be non-negative", "rate")


@dataclass(frozen=True)
class Scenario:
    graph: NetworkGraph
    clients: tuple[ClientSpec, ...]
    slot_count: int = 100_000
    seed: int = 0
    alpha_proc: Fraction = Fraction(1)
    alpha_tx: Fraction = Fraction(1)
    policy: str = "DI-DCNC"
    max_arrivals_per_slot: int | None = None
    warmup: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(self.clients))
        object.__setattr__(self, "alpha_proc", as_fraction(self.alpha_proc))
        object.__setattr__(self, "alpha_tx", as_fraction(self.alpha_tx))
        self._validate()

    def _validate(self) -> None:
        nodes = set(self.graph.nodes)
        for c, client in enumerate(self.clients):
            for name, node in (("source", client.source), ("destination", client.destination)):
                if node not in nodes:
                    raise ScenarioError(f"client {c} {name} {node!r} is not a node", f"clients[{c}].{name}")
            for m, f in enumerate(client.service.functions):
                hosts = self.graph.static_sources.get(f.object_name)
                if not hosts:
                    raise ScenarioError(
                        f"database {f.object_name!r} (client {c}, function {m}) has no static source",
                        f"clients[{c}].service[{m}].database",
                    )
        for name in ("alpha_proc", "alpha_tx"):
            a = getattr(self, name)
            if not 0 < a <= 1:
                raise ScenarioError(f"{name} must lie in (0, 1], got {a}", name)
        if self.policy not in POLICIES:
            raise ScenarioError(f"unknown policy {self.policy!r}", "policy")
        if self.slot_count < 1:
            raise ScenarioError("slot count must be positive", "slots")
        if self.max_arrivals_per_slot is not None and self.max_arrivals_per_slot < 0:
            raise ScenarioError("max_arrivals must be non-negative", "max_arrivals")
        if self.warmup is not None and not 0 <= self.warmup < self.slot_count:
            raise ScenarioError("warmup must lie in [0, slots)", "warmup")

    def effective_proc_capacity(self, node: str) -> Fraction:
        return self.alpha_proc * self.graph.proc_capacity[node]

    def effective_link_capacity(self, link: tuple[str, str]) -> Fraction:
        return self.alpha_tx * self.graph.link_capacity[link]

    def arrival_cap(self, client: ClientSpec) -> int:
        if self.max_arrivals_per_slot is not None:
            return self.max_arrivals_per_slot
        return default_arrival_cap(client.arrival_rate)

    @property
    def warmup_slots(self) -> int:
        if self.warmup is not None:
            return self.warmup
        return min(10_000, self.slot_count // 10)

    def with_rates(self, rate) -> "Scenario":
        """Same scenario with every client's rate set to ``rate``."""
        clients = tuple(replace(c, arrival_rate=as_fraction(rate)) for c in self.clients)
        return replace(self, clients=clients)

    def with_static_sources(self, sources: Mapping[str, Iterable[str]]) -> "Scenario":
        g = self.graph
        graph = NetworkGraph(g.nodes, g.links, g.proc_capacity, g.link_capacity, sources)
        return replace(self, graph=graph)


def default_arrival_cap(rate) -> int:
    return max(10, math.ceil(10 * rate))


# ---------------------------------------------------------------------------
# scenario files


def _schema() -> dict:
    text = resources.files("didcnc").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def scenario_from_dict(data: Mapping) -> Scenario:
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}", where) from None

    proc = {}
    for n in data["nodes"]:
        proc[n["id"]] = as_fraction(n["capacity"])
    links = {}
    for link in data["links"]:
        links[(link["tail"], link["head"])] = as_fraction(link["capacity"])
    if len(proc) != len(data["nodes"]):
        raise ScenarioError("duplicate node id", "nodes")
    graph = NetworkGraph(
        nodes=tuple(proc),
        links=tuple(links),
        proc_capacity=proc,
        link_capacity=links,
        static_sources={k: frozenset(v) for k, v in data["databases"].items()},
    )
    clients = []
    for c in data["clients"]:
        funcs = tuple(
            FunctionSpec(
                scaling_factor=as_fraction(f["scaling"]),
                workload=as_fraction(f["workload"]),
                object_name=f["database"],
                merging_ratio=f["merging"],
            )
            for f in c["service"]
        )
        clients.append(ClientSpec(c["source"], c["destination"], ServiceSpec(funcs), as_fraction(c["rate"])))
    return Scenario(
        graph=graph,
        clients=tuple(clients),
        slot_count=data.get("slots", 100_000),
        seed=data.get("seed", 0),
        alpha_proc=as_fraction(data.get("alpha_proc", 1)),
        alpha_tx=as_fraction(data.get("alpha_tx", 1)),
        policy=data.get("policy", "DI-DCNC"),
        max_arrivals_per_slot=data.get("max_arrivals"),
        warmup=data.get("warmup"),
    )


def scenario_to_dict(s: Scenario) -> dict:
    g = s.graph
    out = {
        "nodes": [{"id": n, "capacity": _dump_number(g.proc_capacity[n])} for n in g.nodes],
        "links": [
            {"tail": i, "head": j, "capacity": _dump_number(g.link_capacity[(i, j)])} for i, j in g.links
        ],
        "databases": {k: sorted(v) for k, v in sorted(g.static_sources.items())},
        "clients": [
            {
                "source": c.source,
                "destination": c.destination,
                "rate": _dump_number(c.arrival_rate),
                "service": [
                    {
                        "scaling": _dump_number(f.scaling_factor),
                        "workload": _dump_number(f.workload),
                        "database": f.object_name,
                        "merging": f.merging_ratio,
                    }
                    for f in c.service.functions
                ],
            }
            for c in s.clients
        ],
        "slots": s.slot_count,
        "seed": s.seed,
        "alpha_proc": _dump_number(s.alpha_proc),
        "alpha_tx": _dump_number(s.alpha_tx),
        "policy": s.policy,
        "max_arrivals": s.max_arrivals_per_slot,
    }
    if s.warmup is not None:
        out["warmup"] = s.warmup
    return out


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})", "<file>") from None
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


# ---------------------------------------------------------------------------
# the 4x4 grid used in the experiments

# Grid positions (row, col); A-D central, E-H corners, I-P the edge nodes
# clockwise from the top row.
GRID_LAYOUT = (
    ("E", "I", "J", "F"),
    ("P", "A", "B", "K"),
    ("O", "C", "D", "L"),
    ("G", "N", "M", "H"),
)

# Database k -> host at cache index 1.  One database per edge (non-corner,
# non-core) node.  With this assignment the LP throughput bound is 13.9
# packets/slot per client, processing next to the cache caps it at 5.0, and
# replicating the databases (cache index) lifts the unrestricted bound
# faster than the cache-restricted one; see README for how it was chosen.
DEFAULT_PLACEMENT = {
    "1": "N",
    "2": "M",
    "3": "O",
    "4": "K",
    "5": "P",
    "6": "J",
    "7": "L",
    "8": "I",
}

DEFAULT_SERVICES = (
    ("E", "H", ((1, "0.2", "1", 1), (2, "0.2", "2", 1))),
    ("F", "G", ((1, "0.5", "3", 2), ("1/2", "0.5", "4", 3))),
    ("G", "F", ((1, "0.1", "5", 1), (3, "0.1", "6", 1))),
    ("H", "E", (("1/2", 1, "7", 5), ("1/3", 1, "8", 10))),
)


def grid_graph_links(layout=GRID_LAYOUT) -> list[tuple[str, str]]:
    rows, cols = len(layout), len(layout[0])
    links = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                links += [(layout[r][c], layout[r][c + 1]), (layout[r][c + 1], layout[r][c])]
            if r + 1 < rows:
                links += [(layout[r][c], layout[r + 1][c]), (layout[r + 1][c], layout[r][c])]
    return links


def default_grid_scenario(rate=4, placement: Mapping[str, str] | None = None) -> Scenario:
    """The 16-node grid with the four two-function clients of the experiments."""
    placement = dict(DEFAULT_PLACEMENT if placement is None else placement)
    nodes = [n for row in GRID_LAYOUT for n in row]
    proc = {n: Fraction(10) if n in "ABCD" else Fraction(5) for n in nodes}
    links = grid_graph_links()
    graph = NetworkGraph(
        nodes=tuple(nodes),
        links=tuple(links),
        proc_capacity=proc,
        link_capacity={l: Fraction(20) for l in links},
        static_sources={k: frozenset([v]) for k, v in placement.items()},
    )
    clients = []
    for s, d, funcs in DEFAULT_SERVICES:
        service = ServiceSpec(tuple(FunctionSpec(as_fraction(x), as_fraction(r), k, z) for x, r, k, z in funcs))
        clients.append(ClientSpec(s, d, service, as_fraction(rate)))
    return Scenario(graph=graph, clients=tuple(clients))


def with_cache_index(scenario: Scenario, index: int) -> Scenario:
    """Replicate every database onto the ``index`` nodes nearest its anchor.

    The anchor is the current host with the smallest id; nearness is BFS hop
    distance from the anchor with ties broken by node id, so the host sets
    are nested in ``index`` and reach every node at ``index == |V|``.
    """
    g = scenario.graph
    if not 1 <= index <= len(g.nodes):
        raise ScenarioError(f"cache index must lie in 1..{len(g.nodes)}", "cache_index")
    sources = {}
    for k, hosts in g.static_sources.items():
        anchor = min(hosts)
        dist = g.hop_distances(anchor)
        ranked = sorted(g.nodes, key=lambda n: (dist.get(n, math.inf), n))
        sources[k] = frozenset(ranked[:index])
    return scenario.with_static_sources(sources)


# ---------------------------------------------------------------------------
# arrivals


def draw_arrivals(client: ClientSpec, rng: np.random.Generator, cap: int | None = None, size=None):
    """Poisson(lambda) live-packet arrivals, clipped at ``cap``.

    Returns an int for ``size=None`` and an int64 array otherwise.
    """
    lam = float(client.arrival_rate)
    if cap is None:
        cap = default_arrival_cap(client.arrival_rate)
    if lam == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    draws = np.minimum(rng.poisson(lam, size=size), cap)
    if size is None:
        return int(draws)
    return draws.astype(np.int64)


def client_streams(seed: int, n_clients: int) -> list[np.random.Generator]:
    """Independent per-client generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(n_clients)
    return [np.random.default_rng(c) for c in children]

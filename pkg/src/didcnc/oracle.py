"""Ground truth for small instances: the max-throughput LP and exhaustive routes.

``max_throughput_lp`` solves the edge-flow form of the stability region:

    max theta
    s.t. per client c, stage m, node i (live layer m = 1..M+1):
           in_m(i) + [m = 1, i = s] theta*lam + [m > 1] xi_{m-1} p_{m-1}(i)
             = out_m(i) + [m <= M] p_m(i) + [m = M+1, i = d] theta*lam*kappa_{M+1}
         per client, stage m, node i (static pipeline m):
           in'_m(i) + [i in V(k_m)] src_m(i) = out'_m(i) + zeta_m p_m(i)
         sum_{c,m} r_m p^c_m(i) <= alpha1 C_i
         sum_{c,m} (f^c_m(i,j) + f'^c_m(i,j)) <= alpha2 C_ij
         all flows >= 0

Every probability mix of embedded routes gives such a flow (sum its route
loads); conversely a flow decomposes into route flows plus circulations that
only waste capacity, so both forms share the optimum.  ``route_lp`` solves
the route-mix form directly on tiny graphs, which is how that equivalence is
tested.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .alg import AugmentedLayeredGraph, EmbeddedRoute, build_alg, route_loads, route_weight
from .model import ClientSpec, Scenario

MAX_ENUM_NODES = 6
MAX_ENUM_STAGES = 2


class LPError(RuntimeError):
    pass


class EnumerationGuard(ValueError):
    """Instance too large for exhaustive enumeration."""


# ---------------------------------------------------------------------------
# dense two-phase simplex


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    objective: object
    iterations: int


def _pivot(T, r, c):
    T[r] = T[r] / T[r, c]
    col = T[:, c].copy()
    col[r] = 0
    if T.dtype != object:
        T -= np.outer(col, T[r])
        return
    for i in range(len(col)):
        if col[i] != 0:
            T[i] = T[i] - col[i] * T[r]


def _simplex(T, basis, n_cols, tol, max_iter, exact, refresh=None, refresh_every=50):
    """Minimise the last row of tableau T over columns < n_cols (in place).

    ``refresh(T, basis)`` rebuilds the tableau from the original data; float
    runs call it every ``refresh_every`` pivots and once more before
    declaring optimality, so rounding drift cannot pick a wrong basis.
    """
    m = T.shape[0] - 1
    it = 0
    stall = 0
    last = None
    fresh = False
    while True:
        if it >= max_iter:
            raise LPError("simplex iteration limit reached")
        if refresh is not None and it and it % refresh_every == 0 and not fresh:
            refresh(T, basis)
            fresh = True
        cost = T[-1, :n_cols]
        bland = stall > 50
        if bland:
            cands = [j for j in range(n_cols) if cost[j] < -tol]
            c = cands[0] if cands else -1
        else:
            c = int(np.argmin(cost)) if not exact else min(range(n_cols), key=lambda j: (cost[j], j))
            if cost[c] >= -tol:
                c = -1
        if c < 0:
            if refresh is None or fresh:
                return "optimal", it
            refresh(T, basis)
            fresh = True
            continue
        col = T[:m, c]
        rhs = T[:m, -1]
        best, r = None, -1
        for i in range(m):
            if col[i] > tol:
                ratio = rhs[i] / col[i]
                if best is None or ratio < best - tol or (abs(ratio - best) <= tol and basis[i] < basis[r]):
                    best, r = ratio, i
        if r < 0:
            return "unbounded", it
        _pivot(T, r, c)
        basis[r] = c
        it += 1
        fresh = False
        obj = T[-1, -1]
        if last is not None and abs(obj - last) <= tol:
            stall += 1
        else:
            stall = 0
        last = obj


def _refresher(A, b, cost_of):
    """Tableau rebuild B^-1 [A | b] with reduced costs from the current cost row."""
    def refresh(T, basis):
        B = A[:, basis]
        body = np.linalg.solve(B, np.concatenate([A, b[:, None]], axis=1))
        body[np.abs(body) < 1e-12] = 0.0
        # basic values can only leave zero through rounding
        body[:, -1] = np.maximum(body[:, -1], 0.0)
        cost = cost_of()
        m = A.shape[0]
        T[:m] = body
        T[-1, :-1] = cost - cost[basis] @ body[:, :-1]
        T[-1, -1] = -(cost[basis] @ body[:, -1])
    return refresh


def linprog_dense(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, exact: bool = False, tol: float = 1e-9,
                  max_iter: int = 50_000) -> LPResult:
    """min c.x s.t. A_ub x <= b_ub, A_eq x = b_eq, x >= 0 (dense tableau).

    ``exact=True`` runs the same pivots on Fractions (tolerance 0).  Float
    runs refactorize periodically and check the answer against the original
    constraints, raising :class:`LPError` if it is not feasible.
    """
    dtype = object if exact else float
    conv = (lambda a: np.array([[Fraction(v) for v in row] for row in a], dtype=object)) if exact else \
        (lambda a: np.asarray(a, dtype=float))
    convv = (lambda a: np.array([Fraction(v) for v in a], dtype=object)) if exact else \
        (lambda a: np.asarray(a, dtype=float))
    if exact:
        tol = 0
    c = convv(c)
    n = len(c)
    A_ub = conv(A_ub) if A_ub is not None and len(A_ub) else np.zeros((0, n), dtype=dtype)
    b_ub = convv(b_ub) if b_ub is not None and len(b_ub) else np.zeros(0, dtype=dtype)
    A_eq = conv(A_eq) if A_eq is not None and len(A_eq) else np.zeros((0, n), dtype=dtype)
    b_eq = convv(b_eq) if b_eq is not None and len(b_eq) else np.zeros(0, dtype=dtype)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    n_art = n + m_ub  # first artificial column
    # columns: x (n) | slacks (m_ub) | artificials (m) | rhs
    width = n + m_ub + m + 1
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    T = np.empty((m + 1, width), dtype=dtype)
    T[...] = zero
    T[:m_ub, :n] = A_ub
    T[m_ub:m, :n] = A_eq
    for i in range(m_ub):
        T[i, n + i] = one
    T[:m_ub, -1] = b_ub
    T[m_ub:m, -1] = b_eq
    for i in range(m):
        if T[i, -1] < 0:
            T[i] = -T[i]
    for i in range(m):
        T[i, n_art + i] = one
    basis = [n_art + i for i in range(m)]
    A0, b0 = (T[:m, :-1].copy(), T[:m, -1].copy()) if not exact else (None, None)
    phase_cost = np.zeros(width - 1)
    phase_cost[n_art:] = 1.0
    refresh = None if exact or m == 0 else _refresher(A0, b0, lambda: phase_cost)
    # phase 1 objective: sum of artificials, expressed in non-basic columns
    T[-1] = zero
    for i in range(m):
        T[-1] = T[-1] - T[i]
    for i in range(m):
        T[-1, n_art + i] = zero
    status, it1 = _simplex(T, basis, n_art + m, tol, max_iter, exact, refresh)
    scale = 1.0 + sum(abs(float(v)) for v in T[:m, -1])
    if -T[-1, -1] > (0 if exact else 1e-7 * scale):
        return LPResult("infeasible", None, None, it1)
    # drive artificials out of the basis; one that cannot leave sits on a
    # redundant row at level zero and never re-enters (phase 2 skips its column)
    for i in range(m):
        if basis[i] >= n_art:
            row = T[i, :n_art]
            nz = [j for j in range(n_art) if abs(row[j]) > tol]
            if nz:
                _pivot(T, i, nz[0])
                basis[i] = nz[0]
    if not exact:
        phase_cost = np.zeros(width - 1)
        phase_cost[:n] = c
    T[-1] = zero
    T[-1, :n] = c
    for i, b in enumerate(basis):
        if T[-1, b] != 0:
            T[-1] = T[-1] - T[-1, b] * T[i]
    status, it2 = _simplex(T, basis, n_art, tol, max_iter, exact, refresh)
    if status != "optimal":
        return LPResult(status, None, None, it1 + it2)
    x = np.empty(width - 1, dtype=dtype)
    x[...] = zero
    for i, b in enumerate(basis):
        x[b] = T[i, -1]
    if not exact:
        resid = np.abs(A0 @ x - b0).max(initial=0.0)
        if resid > 1e-6 * (1 + np.abs(b0).max(initial=0.0)) or x.min(initial=0.0) < -1e-9:
            raise LPError(f"simplex lost feasibility (residual {resid:.3g})")
    x = x[:n]
    obj = sum((ci * xi for ci, xi in zip(c, x)), zero)
    return LPResult("optimal", x, obj, it1 + it2)


# ---------------------------------------------------------------------------
# max-throughput LP (edge-flow form)


@dataclass
class ThroughputLP:
    theta: object  # max uniform scale of the clients' base rates
    rates: list  # base rate per client
    variables: list  # (client, kind, stage, element) per column
    flows: np.ndarray | None
    iterations: int

    @property
    def boundary(self) -> float:
        """theta* times the (common) base rate: the predicted per-client throughput."""
        return float(self.theta) * float(self.rates[0]) if self.rates else 0.0

    def witness_rows(self, tol: float = 1e-9):
        """(client, kind, stage, element, flow) for every non-zero flow."""
        for (c, kind, m, elem), f in zip(self.variables, self.flows):
            if abs(float(f)) > tol:
                yield c, kind, m, elem, float(f)

    def write_witness(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["client", "kind", "stage", "element", "flow"])
            for c, kind, m, elem, f in self.witness_rows():
                if isinstance(elem, tuple):
                    elem = f"{elem[0]}->{elem[1]}"
                w.writerow([c, kind, m, elem, f"{f:.9g}"])


def build_throughput_lp(scenario: Scenario, static_local: bool = False):
    """Matrices (c, A_ub, b_ub, A_eq, b_eq, variables) of the edge-flow LP.

    ``static_local`` restricts stage m to process at caches of database k_m
    with no static transmission (the route set of the L2S benchmark).
    """
    g = scenario.graph
    nodes, links = g.nodes, g.links
    cols: list = []
    col = {}

    def var(key):
        if key not in col:
            col[key] = len(cols)
            cols.append(key)
        return col[key]

    def add(row, key, value):
        j = col.get(key)
        if j is not None:
            row[j] = row.get(j, 0) + value

    theta = var((-1, "theta", 0, None))
    for c, client in enumerate(scenario.clients):
        M = len(client.service)
        for m in range(1, M + 2):
            for l in links:
                var((c, "live", m, l))
        for m in range(1, M + 1):
            hosts = g.static_sources[client.service.functions[m - 1].object_name]
            if not static_local:
                for l in links:
                    var((c, "static", m, l))
            for i in nodes:
                if not static_local or i in hosts:
                    var((c, "proc", m, i))
            for v in sorted(hosts):
                var((c, "source", m, v))
    n = len(cols)
    eq_rows, eq_rhs = [], []
    for c, client in enumerate(scenario.clients):
        funcs = client.service.functions
        M = len(funcs)
        kappa = client.service.stage_coefficients()
        lam = client.arrival_rate
        for m in range(1, M + 2):
            for i in nodes:
                row = {}
                for l in links:
                    if l[1] == i:
                        add(row, (c, "live", m, l), 1)
                    if l[0] == i:
                        add(row, (c, "live", m, l), -1)
                if m == 1 and i == client.source:
                    row[theta] = row.get(theta, 0) + lam
                if m > 1:
                    add(row, (c, "proc", m - 1, i), funcs[m - 2].scaling_factor)
                if m <= M:
                    add(row, (c, "proc", m, i), -1)
                if m == M + 1 and i == client.destination:
                    row[theta] = row.get(theta, 0) - lam * kappa[M]
                eq_rows.append(row)
                eq_rhs.append(Fraction(0))
        for m in range(1, M + 1):
            for i in nodes:
                row = {}
                for l in links:
                    if l[1] == i:
                        add(row, (c, "static", m, l), 1)
                    if l[0] == i:
                        add(row, (c, "static", m, l), -1)
                add(row, (c, "source", m, i), 1)
                if funcs[m - 1].merging_ratio:
                    add(row, (c, "proc", m, i), -funcs[m - 1].merging_ratio)
                if row:
                    eq_rows.append(row)
                    eq_rhs.append(Fraction(0))
    ub_rows, ub_rhs = [], []
    for i in nodes:
        row = {}
        for c, client in enumerate(scenario.clients):
            for m, f in enumerate(client.service.functions, start=1):
                if f.workload:
                    add(row, (c, "proc", m, i), f.workload)
        ub_rows.append(row)
        ub_rhs.append(scenario.effective_proc_capacity(i))
    for l in links:
        row = {}
        for c, client in enumerate(scenario.clients):
            M = len(client.service)
            for m in range(1, M + 2):
                add(row, (c, "live", m, l), 1)
            for m in range(1, M + 1):
                add(row, (c, "static", m, l), 1)
        ub_rows.append(row)
        ub_rhs.append(scenario.effective_link_capacity(l))
    obj = [Fraction(0)] * n
    obj[theta] = Fraction(-1)
    return obj, ub_rows, ub_rhs, eq_rows, eq_rhs, cols


def _dense(rows, n, exact):
    if exact:
        A = np.empty((len(rows), n), dtype=object)
        A[...] = Fraction(0)
        for r, row in enumerate(rows):
            for j, v in row.items():
                A[r, j] = Fraction(v)
        return A
    A = np.zeros((len(rows), n))
    for r, row in enumerate(rows):
        for j, v in row.items():
            A[r, j] = float(v)
    return A


def max_throughput_lp(scenario: Scenario, exact: bool = False, solver=None,
                      static_local: bool = False) -> ThroughputLP:
    """theta*: the largest common scale of the base rates inside the stability region.

    ``solver`` may be a callable with :func:`linprog_dense`'s signature (the
    tests pass a scipy wrapper to cross-check).
    """
    obj, ub_rows, ub_rhs, eq_rows, eq_rhs, cols = build_throughput_lp(scenario, static_local)
    n = len(cols)
    A_ub, A_eq = _dense(ub_rows, n, exact), _dense(eq_rows, n, exact)
    conv = (lambda v: [Fraction(x) for x in v]) if exact else (lambda v: [float(x) for x in v])
    solve = solver or linprog_dense
    kwargs = {"exact": exact} if solver is None else {}
    res = solve(conv(obj), A_ub, conv(ub_rhs), A_eq, conv(eq_rhs), **kwargs)
    if res.status == "unbounded":
        raise LPError("LP unbounded: some client has zero rate or zero load")
    if res.status != "optimal":
        raise LPError(f"LP {res.status}: destination unreachable?")
    theta = res.x[0]
    if theta <= 0 and any(c.arrival_rate > 0 for c in scenario.clients):
        raise LPError("LP optimum is zero: some destination or database is unreachable")
    return ThroughputLP(theta, [c.arrival_rate for c in scenario.clients], cols, res.x, res.iterations)


# ---------------------------------------------------------------------------
# exhaustive routes


def simple_paths(graph, src: str, dst: str) -> list[tuple[str, ...]]:
    """All simple paths from src to dst (including the trivial one if src == dst)."""
    adj = {v: [] for v in graph.nodes}
    for i, j in graph.links:
        adj[i].append(j)
    out = []

    def walk(path, seen):
        u = path[-1]
        if u == dst:
            out.append(tuple(path))
            return
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                path.append(v)
                walk(path, seen)
                path.pop()
                seen.discard(v)

    walk([src], {src})
    return out


def _guard(alg: AugmentedLayeredGraph) -> None:
    if len(alg.graph.nodes) > MAX_ENUM_NODES or alg.stages > MAX_ENUM_STAGES:
        raise EnumerationGuard(
            f"enumeration limited to {MAX_ENUM_NODES} nodes and {MAX_ENUM_STAGES} stages "
            f"(got {len(alg.graph.nodes)} nodes, {alg.stages} stages)"
        )


def enumerate_routes(alg: AugmentedLayeredGraph, client: ClientSpec, policy: str = "DI-DCNC"):
    """Every valid embedded route of ``client`` (L2S: only its restricted routes)."""
    _guard(alg)
    g, service = alg.graph, alg.service
    M = alg.stages
    paths = {}

    def sp(a, b):
        if (a, b) not in paths:
            paths[(a, b)] = simple_paths(g, a, b)
        return paths[(a, b)]

    hosts = [sorted(g.static_sources[f.object_name]) for f in service.functions]
    routes = []
    for procs in itertools.product(g.nodes, repeat=M):
        if policy == "L2S" and any(p not in h for p, h in zip(procs, hosts)):
            continue
        starts = (client.source,) + procs[:-1]
        live_opts = [sp(a, b) for a, b in zip(starts, procs)]
        if policy == "L2S":
            static_opts = [[(p,)] for p in procs]
        else:
            static_opts = [[path for v in h for path in sp(v, p)] for h, p in zip(hosts, procs)]
        out_opts = sp(procs[-1], client.destination)
        for live in itertools.product(*live_opts):
            for static in itertools.product(*static_opts):
                for out in out_opts:
                    routes.append(EmbeddedRoute(tuple(procs), tuple(live), tuple(static), out))
    return routes


def brute_force_min_star(alg: AugmentedLayeredGraph, client: ClientSpec, queues, policy: str = "DI-DCNC"):
    """Exhaustive argmin under the shared tie-break; returns ``(route, weight)``.

    For S2L the static legs are left out of the first comparison and then
    chosen as the best static path to the fixed processing nodes.
    """
    routes = enumerate_routes(alg, client, policy)
    if not routes:
        raise ValueError("no valid route")
    index = alg.graph.index
    if policy != "S2L":
        scored = [(r.tie_key(route_weight(r, alg.service, queues), index), r) for r in routes]
        key, best = min(scored, key=lambda kr: kr[0])
        return best, key[0]
    no_static = {}
    for r in routes:
        stripped = EmbeddedRoute(r.processing, r.live_paths, tuple((p,) for p in r.processing), r.output_path)
        if stripped in no_static:
            continue
        w = route_weight(stripped, alg.service, queues)
        hops = stripped.edge_count
        paths = tuple(tuple(index[v] for v in p) for p in stripped.live_paths) + (
            tuple(index[v] for v in stripped.output_path),
        )
        no_static[stripped] = (w, hops, tuple(index[p] for p in r.processing), paths)
    stripped, _ = min(no_static.items(), key=lambda kv: kv[1])
    candidates = [r for r in routes if r.processing == stripped.processing and r.live_paths == stripped.live_paths
                  and r.output_path == stripped.output_path]
    scored = [(r.tie_key(route_weight(r, alg.service, queues), index), r) for r in candidates]
    key, best = min(scored, key=lambda kr: kr[0])
    return best, key[0]


def route_lp(scenario: Scenario, exact: bool = True):
    """theta* from the route-mix form; returns (theta, {client: [(route, rate)]}).

    Only for tiny instances (uses :func:`enumerate_routes`).
    """
    g = scenario.graph
    columns = []
    for c, client in enumerate(scenario.clients):
        alg = build_alg(g, client.service)
        for r in enumerate_routes(alg, client):
            columns.append((c, r, route_loads(r, client.service)))
    n = len(columns) + 1
    obj = [Fraction(0)] * n
    obj[0] = Fraction(-1)
    eq_rows, eq_rhs = [], []
    for c, client in enumerate(scenario.clients):
        row = {0: -client.arrival_rate}
        for k, (cc, _, _) in enumerate(columns, start=1):
            if cc == c:
                row[k] = 1
        eq_rows.append(row)
        eq_rhs.append(Fraction(0))
    ub_rows, ub_rhs = [], []
    for i in g.nodes:
        ub_rows.append({k: ld.node_load[i] for k, (_, _, ld) in enumerate(columns, start=1) if i in ld.node_load})
        ub_rhs.append(scenario.effective_proc_capacity(i))
    for l in g.links:
        ub_rows.append({k: ld.link_load[l] for k, (_, _, ld) in enumerate(columns, start=1) if l in ld.link_load})
        ub_rhs.append(scenario.effective_link_capacity(l))
    conv = (lambda v: [Fraction(x) for x in v]) if exact else (lambda v: [float(x) for x in v])
    res = linprog_dense(conv(obj), _dense(ub_rows, n, exact), conv(ub_rhs), _dense(eq_rows, n, exact),
                        conv(eq_rhs), exact=exact)
    if res.status != "optimal":
        raise LPError(f"route LP {res.status}")
    if res.x[0] <= 0:
        raise LPError("route LP optimum is zero: some client has no route")
    mix: dict[int, list] = {c: [] for c in range(len(scenario.clients))}
    for k, (c, r, _) in enumerate(columns, start=1):
        if res.x[k] > 0:
            mix[c].append((r, res.x[k]))
    return res.x[0], mix

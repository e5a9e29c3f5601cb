"""Min-STAR route selection and the S2L / L2S benchmark selectors.

Every pipeline of the ALG is a copy of the network whose transmission
weights are the base weights ``Q_ij / C_ij`` times a per-pipeline constant
(kappa_m for live layer m, zeta_m * kappa_m for static pipeline m).  So one
all-pairs shortest-path table of the base network per slot, shared by all
clients, answers every SPW query of every client, and the chain is solved by
a dynamic program over processing locations.

Ties are broken by the same total order everywhere (see
:meth:`didcnc.alg.EmbeddedRoute.tie_key`): lower weight, then fewer ALG
edges, then the smaller processing-node sequence, then the smaller path
node sequences (node order = sorted node ids).

The kernels below are written so that numba compiles them for float64, and
their ``py_func`` runs unchanged on numpy object arrays of Fractions; the
exact mode is what the oracle comparisons use.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .alg import (
    LIVE,
    SUPER_SOURCE,
    AlgVertex,
    AugmentedLayeredGraph,
    EmbeddedRoute,
    edge_weight,
)
from .model import ClientSpec, NetworkGraph

DI_DCNC, S2L, L2S = "DI-DCNC", "S2L", "L2S"
_MODE = {DI_DCNC: 0, S2L: 1, L2S: 2}
UNREACHABLE = 1 << 40
FLOAT_TOL = 1e-9


class InfeasibleRoute(RuntimeError):
    """No finite-weight route: destination or a database is unreachable."""


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _apsp(wmat, adj, zero, inf, big):
    """Floyd-Warshall under the lexicographic (weight, hops) order."""
    n = wmat.shape[0]
    W = np.empty_like(wmat)
    H = np.empty((n, n), np.int64)
    for i in range(n):
        for j in range(n):
            if i == j:
                W[i, j] = zero
                H[i, j] = 0
            elif adj[i, j]:
                W[i, j] = wmat[i, j]
                H[i, j] = 1
            else:
                W[i, j] = inf
                H[i, j] = big
    for k in range(n):
        for i in range(n):
            if H[i, k] >= big:
                continue
            wik = W[i, k]
            hik = H[i, k]
            for j in range(n):
                if H[k, j] >= big:
                    continue
                w = wik + W[k, j]
                h = hik + H[k, j]
                if w < W[i, j] or (w == W[i, j] and h < H[i, j]):
                    W[i, j] = w
                    H[i, j] = h
    return W, H


@njit(cache=True)
def _select_route(W, H, H0, wmat, adj, qn, s, d, c_live, c_stat, c_proc, smask, mode, tol, zero, inf, big):
    """DP over processing locations plus lexicographic path recovery.

    mode 0 = min-STAR, 1 = S2L (static terms dropped from the DP), 2 = L2S
    (stage m restricted to caches of database k_m, empty static paths).
    Returns (feasible, weight, alg_edges, procs, sources, paths, path_len).
    """
    n = W.shape[0]
    M = c_proc.shape[0]
    Pw = np.empty_like(qn)
    Ph = np.zeros(n, np.int64)
    Pproc = np.zeros((n, M), np.int64)
    Pv = np.zeros((n, M), np.int64)
    Nw = np.empty_like(qn)
    Nh = np.zeros(n, np.int64)
    Nproc = np.zeros((n, M), np.int64)
    Nv = np.zeros((n, M), np.int64)

    # live layer 1
    for p in range(n):
        if H[s, p] >= big:
            Pw[p] = inf
            Ph[p] = big
        else:
            Pw[p] = c_live[0] * W[s, p] if c_live[0] != 0 else zero
            Ph[p] = H[s, p] if c_live[0] != 0 else H0[s, p]

    for m in range(M):
        if m > 0:
            # live layer m+1: best previous processing location q for each p
            for p in range(n):
                best_q = -1
                bw = inf
                bh = big
                for q in range(n):
                    if Ph[q] >= big or H[q, p] >= big:
                        continue
                    if c_live[m] != 0:
                        w = Pw[q] + c_live[m] * W[q, p]
                        h = Ph[q] + H[q, p]
                    else:
                        w = Pw[q]
                        h = Ph[q] + H0[q, p]
                    better = False
                    if best_q < 0:
                        better = True
                    elif w < bw:
                        better = True
                    elif w == bw:
                        if h < bh:
                            better = True
                        elif h == bh:
                            for t in range(m):
                                if Pproc[q, t] != Pproc[best_q, t]:
                                    better = Pproc[q, t] < Pproc[best_q, t]
                                    break
                    if better:
                        best_q = q
                        bw = w
                        bh = h
                if best_q < 0:
                    Nw[p] = inf
                    Nh[p] = big
                else:
                    Nw[p] = bw
                    Nh[p] = bh
                    for t in range(m):
                        Nproc[p, t] = Pproc[best_q, t]
                        Nv[p, t] = Pv[best_q, t]
            for p in range(n):
                Pw[p] = Nw[p]
                Ph[p] = Nh[p]
                for t in range(m):
                    Pproc[p, t] = Nproc[p, t]
                    Pv[p, t] = Nv[p, t]

        # processing of stage m at p (live + static processing edges, o'->v edge)
        for p in range(n):
            Pproc[p, m] = p
            if Ph[p] >= big:
                continue
            if mode == 2 and not smask[m, p]:
                Pw[p] = inf
                Ph[p] = big
                continue
            if c_proc[m] != 0:
                Pw[p] = Pw[p] + c_proc[m] * qn[p]
            Ph[p] = Ph[p] + 3
            if mode == 0:
                best_v = -1
                sw = inf
                sh = big
                for v in range(n):
                    if not smask[m, v] or H[v, p] >= big:
                        continue
                    if c_stat[m] != 0:
                        w = c_stat[m] * W[v, p]
                        h = H[v, p]
                    else:
                        w = zero
                        h = H0[v, p]
                    if best_v < 0 or w < sw or (w == sw and h < sh):
                        best_v = v
                        sw = w
                        sh = h
                if best_v < 0:
                    Pw[p] = inf
                    Ph[p] = big
                else:
                    Pw[p] = Pw[p] + sw
                    Ph[p] = Ph[p] + sh
                    Pv[p, m] = best_v
            elif mode == 2:
                Pv[p, m] = p

    # output layer
    best_p = -1
    bw = inf
    bh = big
    c_out = c_live[M]
    for p in range(n):
        if Ph[p] >= big or H[p, d] >= big:
            continue
        w = Pw[p] + c_out * W[p, d]
        h = Ph[p] + H[p, d]
        better = False
        if best_p < 0:
            better = True
        elif w < bw:
            better = True
        elif w == bw:
            if h < bh:
                better = True
            elif h == bh:
                for t in range(M):
                    if Pproc[p, t] != Pproc[best_p, t]:
                        better = Pproc[p, t] < Pproc[best_p, t]
                        break
        if better:
            best_p = p
            bw = w
            bh = h

    procs = np.zeros(M, np.int64)
    sources = np.zeros(M, np.int64)
    paths = np.full((2 * M + 1, n), -1, np.int64)
    plen = np.zeros(2 * M + 1, np.int64)
    if best_p < 0:
        return False, bw, bh, procs, sources, paths, plen
    for t in range(M):
        procs[t] = Pproc[best_p, t]
        sources[t] = Pv[best_p, t]

    if mode == 1:
        # S2L: static packets follow the best static path to the fixed locations
        for t in range(M):
            p = procs[t]
            best_v = -1
            sw = inf
            sh = big
            for v in range(n):
                if not smask[t, v] or H[v, p] >= big:
                    continue
                if c_stat[t] != 0:
                    w = c_stat[t] * W[v, p]
                    h = H[v, p]
                else:
                    w = zero
                    h = H0[v, p]
                if best_v < 0 or w < sw or (w == sw and h < sh):
                    best_v = v
                    sw = w
                    sh = h
            if best_v < 0:
                return False, inf, big, procs, sources, paths, plen
            sources[t] = best_v
            bw = bw + sw
            bh = bh + sh

    # recover lexicographically smallest optimal paths
    for k in range(2 * M + 1):
        if k == 2 * M:
            u = procs[M - 1]
            target = d
            c = c_out
        elif k % 2 == 0:
            t = k // 2
            u = s if t == 0 else procs[t - 1]
            target = procs[t]
            c = c_live[t]
        else:
            t = k // 2
            u = sources[t]
            target = procs[t]
            c = c_stat[t]
        paths[k, 0] = u
        length = 1
        cur = u
        while cur != target:
            nxt = -1
            for x in range(n):
                if not adj[cur, x]:
                    continue
                if c != 0:
                    if H[x, target] >= big or H[x, target] + 1 != H[cur, target]:
                        continue
                    diff = wmat[cur, x] + W[x, target] - W[cur, target]
                    if abs(diff) <= tol * (1 + abs(W[cur, target])):
                        nxt = x
                        break
                else:
                    if H0[x, target] < big and H0[x, target] + 1 == H0[cur, target]:
                        nxt = x
                        break
            if nxt < 0:
                return False, inf, big, procs, sources, paths, plen
            paths[k, length] = nxt
            length += 1
            cur = nxt
        plen[k] = length
    return True, bw, bh, procs, sources, paths, plen


# ---------------------------------------------------------------------------
# router


@dataclass
class _ClientTables:
    source: int
    dest: int
    c_live: np.ndarray
    c_stat: np.ndarray
    c_proc: np.ndarray
    smask: np.ndarray
    c_live_x: np.ndarray  # exact (object) copies
    c_stat_x: np.ndarray
    c_proc_x: np.ndarray


def _object_array(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        out[i] = v
    return out


class Router:
    """Route selector for a fixed network and client set.

    ``select`` takes the per-node and per-link base weights
    ``Q~_i / C_i**2`` and ``Q~_ij / C_ij**2`` (see
    :meth:`didcnc.control.VirtualQueueState.weight_arrays`); float arrays run
    the compiled kernels, object arrays of Fractions run them exactly.
    """

    def __init__(self, graph: NetworkGraph, clients):
        self.graph = graph
        self.clients = list(clients)
        self.names = graph.nodes
        self.index = graph.index
        n = len(graph.nodes)
        self.n = n
        self.tails = np.array([self.index[i] for i, _ in graph.links], dtype=np.int64)
        self.heads = np.array([self.index[j] for _, j in graph.links], dtype=np.int64)
        self.adj = np.zeros((n, n), dtype=np.bool_)
        self.adj[self.tails, self.heads] = True
        _, self.H0 = _apsp(np.zeros((n, n)), self.adj, 0.0, np.inf, UNREACHABLE)
        self.tables = [self._client_tables(c) for c in self.clients]
        self._routes: dict[bytes, EmbeddedRoute] = {}

    def _client_tables(self, client: ClientSpec) -> _ClientTables:
        service = client.service
        kappa = service.stage_coefficients()
        funcs = service.functions
        c_live = list(kappa)
        c_stat = [f.merging_ratio * kappa[m] for m, f in enumerate(funcs)]
        c_proc = [f.workload * kappa[m] for m, f in enumerate(funcs)]
        smask = np.zeros((len(funcs), self.n), dtype=np.bool_)
        for m, f in enumerate(funcs):
            for v in self.graph.static_sources.get(f.object_name, ()):
                smask[m, self.index[v]] = True
        return _ClientTables(
            self.index[client.source],
            self.index[client.destination],
            np.array([float(x) for x in c_live]),
            np.array([float(x) for x in c_stat]),
            np.array([float(x) for x in c_proc]),
            smask,
            _object_array(c_live),
            _object_array(c_stat),
            _object_array(c_proc),
        )

    def base_matrix(self, link_w: np.ndarray) -> np.ndarray:
        if link_w.dtype == object:
            wmat = np.full((self.n, self.n), math.inf, dtype=object)
        else:
            wmat = np.full((self.n, self.n), math.inf)
        wmat[self.tails, self.heads] = link_w
        return wmat

    def shortest_paths(self, link_w: np.ndarray):
        """(W, H) all-pairs tables of the base network."""
        wmat = self.base_matrix(link_w)
        if wmat.dtype == object:
            W, H = _apsp.py_func(wmat, self.adj, Fraction(0), math.inf, UNREACHABLE)
        else:
            W, H = _apsp(wmat, self.adj, 0.0, math.inf, UNREACHABLE)
        return wmat, W, H

    def select(self, node_w, link_w, policy: str = DI_DCNC, which=None, tables=None):
        """Routes for the clients in ``which`` (default all).

        Returns a list of ``(route, weight)`` pairs, or ``None`` entries for
        clients with no finite-weight route.
        """
        mode = _MODE[policy]
        exact = np.asarray(node_w).dtype == object or np.asarray(link_w).dtype == object
        if exact:
            node_w = _object_array([Fraction(x) for x in node_w])
            link_w = _object_array([Fraction(x) for x in link_w])
        if tables is None:
            tables = self.shortest_paths(link_w)
        wmat, W, H = tables
        which = range(len(self.clients)) if which is None else which
        out = []
        for c in which:
            t = self.tables[c]
            if exact:
                res = _select_route.py_func(
                    W, H, self.H0, wmat, self.adj, node_w, t.source, t.dest,
                    t.c_live_x, t.c_stat_x, t.c_proc_x, t.smask, mode, 0, Fraction(0), math.inf, UNREACHABLE,
                )
            else:
                res = _select_route(
                    W, H, self.H0, wmat, self.adj, node_w, t.source, t.dest,
                    t.c_live, t.c_stat, t.c_proc, t.smask, mode, FLOAT_TOL, 0.0, math.inf, UNREACHABLE,
                )
            out.append(self._to_route(res))
        return out

    def _to_route(self, res):
        ok, weight, _, procs, sources, paths, plen = res
        if not ok:
            return None
        key = procs.tobytes() + sources.tobytes() + paths.tobytes()
        route = self._routes.get(key)
        if route is not None:
            return route, weight
        names = self.names
        seqs = [tuple(names[x] for x in paths[k, : plen[k]]) for k in range(len(plen))]
        M = len(procs)
        route = EmbeddedRoute(
            processing=tuple(names[p] for p in procs),
            live_paths=tuple(seqs[2 * m] for m in range(M)),
            static_paths=tuple(seqs[2 * m + 1] for m in range(M)),
            output_path=seqs[2 * M],
        )
        if len(self._routes) < 100_000:
            self._routes[key] = route
        return route, weight


def _single_client_router(alg: AugmentedLayeredGraph, client: ClientSpec) -> Router:
    return Router(alg.graph, [client])


def _route(alg, client, queues, policy):
    router = _single_client_router(alg, client)
    node_w, link_w = queues.weight_arrays()
    (res,) = router.select(node_w, link_w, policy)
    if res is None:
        raise InfeasibleRoute(f"no finite-weight {policy} route from {client.source} to {client.destination}")
    return res[0]


def min_star(alg: AugmentedLayeredGraph, client: ClientSpec, queues) -> EmbeddedRoute:
    """Minimum-weight embedded route of ``client`` (DI-DCNC route selection)."""
    return _route(alg, client, queues, DI_DCNC)


def s2l_route(alg: AugmentedLayeredGraph, client: ClientSpec, queues) -> EmbeddedRoute:
    """Live-first benchmark: optimise live/processing/output, then fetch static data."""
    return _route(alg, client, queues, S2L)


def l2s_route(alg: AugmentedLayeredGraph, client: ClientSpec, queues) -> EmbeddedRoute:
    """Static-first benchmark: process every stage at a cache of its database."""
    return _route(alg, client, queues, L2S)


# ---------------------------------------------------------------------------
# Dijkstra on the ALG itself


@dataclass
class ShortestPathTable:
    """Single-source (forward) or single-sink (reverse) shortest paths.

    ``dist[v]`` is SPW between the root and ``v``; ``hops[v]`` the ALG edge
    count; ``seq[v]`` the base-node index sequence used for tie-breaks
    (super source = -1).  Unreachable vertices are absent from ``dist``.
    """

    root: AlgVertex
    reverse: bool
    dist: dict
    hops: dict
    seq: dict
    pred: dict

    def weight(self, v):
        return self.dist.get(v, math.inf)

    def path(self, v) -> list[AlgVertex]:
        """Vertices from root to ``v`` (forward) or from ``v`` to root (reverse)."""
        if v not in self.dist:
            raise KeyError(f"{v} unreachable")
        out = [v]
        while out[-1] != self.root:
            out.append(self.pred[out[-1]])
        return out if self.reverse else out[::-1]


def alg_weights(alg: AugmentedLayeredGraph, queues) -> dict:
    kappa = alg.service.stage_coefficients()
    return {e: edge_weight(e, alg.service, queues, kappa) for e in alg.edges}


def sssp(alg: AugmentedLayeredGraph, weights: dict, root: AlgVertex, reverse: bool = False) -> ShortestPathTable:
    """Dijkstra over the weighted ALG with (weight, hops, node sequence) labels."""
    index = alg.graph.index

    def idx(v):
        return -1 if v.base_node == SUPER_SOURCE else index[v.base_node]

    best = {root: (0, 0, (idx(root),))}
    pred = {}
    done = set()
    tick = itertools.count()
    heap = [(best[root], next(tick), root)]
    while heap:
        key, _, u = heapq.heappop(heap)
        if u in done or key != best[u]:
            continue
        done.add(u)
        w, h, seq = key
        edges = alg.in_edges[u] if reverse else alg.out_edges[u]
        for e in edges:
            v = e.tail if reverse else e.head
            if v in done:
                continue
            ew = weights[e]
            if ew < 0:
                raise ValueError("negative edge weight")
            nseq = (idx(v),) + seq if reverse else seq + (idx(v),)
            cand = (w + ew, h + 1, nseq)
            if v not in best or cand < best[v]:
                best[v] = cand
                pred[v] = u
                heapq.heappush(heap, (cand, next(tick), v))
    return ShortestPathTable(
        root=root,
        reverse=reverse,
        dist={v: k[0] for v, k in best.items()},
        hops={v: k[1] for v, k in best.items()},
        seq={v: k[2] for v, k in best.items()},
        pred=pred,
    )


def min_star_reference(alg: AugmentedLayeredGraph, client: ClientSpec, queues, policy: str = DI_DCNC):
    """Route selection composed from Dijkstra sweeps on the ALG.

    For one function this is three sweeps (from s_1, from o'_1, and reverse
    from d_2) and an argmin over p; chains sweep every layer from every node.
    Returns ``(route, weight)``.  Slow; used to cross-check :class:`Router`.
    """
    g, service = alg.graph, alg.service
    M = alg.stages
    index = g.index
    weights = alg_weights(alg, queues)
    kappa = service.stage_coefficients()

    def names(seq):
        return tuple(g.nodes[i] for i in seq if i >= 0)

    src = AlgVertex(client.source, 1, LIVE)
    first = sssp(alg, weights, src)
    out = sssp(alg, weights, AlgVertex(client.destination, M + 1, LIVE), reverse=True)
    statics = [sssp(alg, weights, alg.super_source(m)) for m in range(1, M + 1)]
    layer_tables = {}
    for m in range(2, M + 1):
        for q in g.nodes:
            layer_tables[(m, q)] = sssp(alg, weights, AlgVertex(q, m, LIVE))

    def live_leg(m, q, p):
        v = AlgVertex(p, m, LIVE)
        table = first if m == 1 else layer_tables[(m, q)]
        if v not in table.dist:
            return None
        return table.dist[v], table.hops[v], table.seq[v]

    def static_leg(m, p):
        if policy == L2S:
            hosts = g.static_sources[service.functions[m - 1].object_name]
            if p not in hosts:
                return None
            return 0, 1, (index[p],)
        v = AlgVertex(p, m, m)
        t = statics[m - 1]
        if v not in t.dist:
            return None
        return t.dist[v], t.hops[v], t.seq[v][1:]  # drop the super source

    def proc_weight(m, p):
        f = service.functions[m - 1]
        return f.workload * kappa[m - 1] * queues.node_weight(p)

    # states: p -> (w, h, procs, paths) with paths excluding S2L static legs
    states = {}
    for p in g.nodes:
        leg = live_leg(1, client.source, p)
        if leg is not None:
            states[p] = (leg[0], leg[1], (), (leg[2],))
    for m in range(1, M + 1):
        processed = {}
        for p, (w, h, procs, paths) in states.items():
            w2 = w + proc_weight(m, p)
            h2 = h + 2  # live and static processing edges
            if policy == S2L:
                processed[p] = (w2, h2 + 1, procs + (index[p],), paths + ((),))
                continue
            leg = static_leg(m, p)
            if leg is None:
                continue
            processed[p] = (w2 + leg[0], h2 + leg[1], procs + (index[p],), paths + (leg[2],))
        if m == M:
            states = processed
            break
        states = {}
        for p in g.nodes:
            cands = []
            for q, (w, h, procs, paths) in processed.items():
                leg = live_leg(m + 1, q, p)
                if leg is None:
                    continue
                cands.append((w + leg[0], h + leg[1], procs, paths + (leg[2],)))
            if cands:
                states[p] = min(cands)
    finals = []
    for p, (w, h, procs, paths) in states.items():
        v = AlgVertex(p, M + 1, LIVE)
        if v not in out.dist:
            continue
        finals.append((w + out.dist[v], h + out.hops[v], procs, paths + (out.seq[v],)))
    if not finals:
        raise InfeasibleRoute("no finite-weight route")
    w, h, procs, paths = min(finals)
    proc_names = tuple(g.nodes[i] for i in procs)
    static_paths = []
    for m in range(1, M + 1):
        seq = paths[2 * m - 1]
        if policy == S2L:
            t = statics[m - 1]
            v = AlgVertex(proc_names[m - 1], m, m)
            if v not in t.dist:
                raise InfeasibleRoute("database unreachable")
            w = w + t.dist[v]
            seq = t.seq[v][1:]
        static_paths.append(names(seq))
    route = EmbeddedRoute(
        processing=proc_names,
        live_paths=tuple(names(paths[2 * m]) for m in range(M)),
        static_paths=tuple(static_paths),
        output_path=names(paths[-1]),
    )
    return route, w

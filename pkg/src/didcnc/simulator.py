"""Slotted simulation of the actual network.

Packets of one admitted batch (all arrivals of a client in a slot share a
route) travel together as *jobs*: a job is a set of identical packets at the
same place with the same route segment, priority key and request credit.
Jobs split when a capacity limit lets only part of them through.

Per slot:

1. packets transmitted in the previous slot reach the next node;
2. arrivals are drawn, routed on the pre-update virtual queues and injected
   (live packets at the source, stage-1 static packets at the chosen cache);
3. nodes process paired packets, smallest live edges-crossed first;
4. links transmit, smallest edges-crossed first (one slot per hop);
5. virtual queues are updated and metrics recorded.

Service is preemptive-resume at unit granularity: a packet that got only
part of its transmission (or processing) this slot keeps that progress, so
the per-slot service never exceeds the effective capacity even when it is
fractional.

Output of a function goes through a per (client, node, stage) accumulator;
whole packets are emitted and the fraction is kept.  Request credit (which
request an output packet "belongs to") moves with the packets so that a
request completes when all of its output has reached the destination.
"""
from __future__ import annotations

import csv
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alg import EmbeddedRoute
from .model import Scenario, client_streams, draw_arrivals
from .routing import Router

LIVE, STATIC, PAIR = 0, 1, 2
EPS = 1e-9
CREDIT_EPS = 1e-6
DEFAULT_SLOPE_THRESHOLD = 0.01
UNSTABLE_DELAY = 1000.0
MIN_STABILITY_SLOTS = 10_000


class InvariantViolation(AssertionError):
    """Raised in debug mode when an engine invariant fails."""


class _Job:
    __slots__ = (
        "kind", "client", "stage", "nodes", "links", "pos", "count", "crossed",
        "birth", "uid", "comp", "group", "progress", "route", "hops",
    )

    def __init__(self, kind, client, stage, nodes, links, count, crossed, birth, uid, comp, group, route, hops=0):
        self.kind = kind
        self.client = client
        self.stage = stage
        self.nodes = nodes  # node indices of the path
        self.links = links  # link indices of the path
        self.pos = 0
        self.count = count
        self.crossed = crossed
        self.birth = birth
        self.uid = uid
        self.comp = comp  # batch id -> [request credit, hops]
        self.group = group
        self.progress = 0.0
        self.route = route
        self.hops = hops


def _split_comp(comp: dict, share: float, live) -> dict:
    """Move ``share`` of every credit entry of a live batch out of ``comp``."""
    out = {}
    for b, entry in comp.items():
        if b not in live:  # finished batches take no more credit
            continue
        moved = entry[0] * share
        out[b] = [moved, entry[1]]
        entry[0] -= moved
    return out


def _merge_comp(into: dict, comp: dict, live, extra_hops: int = 0) -> None:
    for b, (units, hops) in comp.items():
        if b not in live:
            continue
        cur = into.get(b)
        if cur is None:
            into[b] = [units, hops + extra_hops]
        else:
            cur[0] += units
            cur[1] = min(cur[1], hops + extra_hops)


@dataclass
class _CompiledRoute:
    route: EmbeddedRoute
    live: list  # per stage: (nodes, links)
    static: list
    output: tuple
    node_load: np.ndarray
    link_load: np.ndarray
    hops: int


@dataclass
class _Batch:
    client: int
    birth: int
    requests: int
    route_hops: int
    credit: float = 0.0
    completed: int = 0


@dataclass
class _Group:
    """Pairing state of one stage of one batch (or of one emitted lot)."""

    gid: int
    node: int
    zeta: int
    expected: int
    crossed: int = -1
    birth: int = 0
    uid: int = 0
    live_in: int = 0
    static_in: int = 0
    moved: int = 0
    consumed: int = 0
    comp: dict = field(default_factory=dict)
    hops: int = 0
    route: object = None
    client: int = 0
    stage: int = 0


@dataclass
class MetricsRecord:
    policy: str
    slots: int
    slots_requested: int
    warmup: int
    arrivals: np.ndarray  # per client, requests
    dropped: np.ndarray
    delivered_packets: np.ndarray  # per client, output packets at d
    completed_requests: np.ndarray  # per client, after warm-up
    delays: np.ndarray  # request delays (slots), births after warm-up
    backlog: np.ndarray  # packets in the system at the end of each slot
    work: np.ndarray  # unfinished work (remaining hops + processing units)
    delivered_series: np.ndarray
    delay_sum_series: np.ndarray
    delay_count_series: np.ndarray
    node_utilization: np.ndarray
    link_utilization: np.ndarray
    arrival_volume: float  # mean live packets per slot over all clients
    stopped_early: bool = False
    operations: int = 0
    checks: int = 0

    @property
    def mean_delay(self) -> float:
        if self.stopped_early:
            return math.inf
        if len(self.delays) == 0:
            return math.nan
        return float(np.mean(self.delays))

    @property
    def stable(self) -> bool:
        if self.stopped_early:
            return False
        if len(self.delays) and self.mean_delay > UNSTABLE_DELAY:
            return False
        if self.slots < MIN_STABILITY_SLOTS:
            raise ValueError(f"stability needs at least {MIN_STABILITY_SLOTS} slots, run has {self.slots}")
        return detect_stability(self.backlog, self.arrival_volume) == "stable"

    @property
    def throughput(self) -> float:
        """Completed requests per slot per client after warm-up."""
        span = max(self.slots - self.warmup, 1)
        return float(self.completed_requests.sum()) / span / max(len(self.completed_requests), 1)

    def to_csv(self, path, window: int = 1000) -> None:
        """Time series: slot, total_backlog, unfinished_work, delivered, mean_delay_window."""
        cs = np.concatenate([[0.0], np.cumsum(self.delay_sum_series)])
        cn = np.concatenate([[0], np.cumsum(self.delay_count_series)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "total_backlog", "unfinished_work", "delivered", "mean_delay_window"])
            for t in range(self.slots):
                lo = max(0, t + 1 - window)
                n = cn[t + 1] - cn[lo]
                mean = (cs[t + 1] - cs[lo]) / n if n else ""
                w.writerow([t, int(self.backlog[t]), f"{self.work[t]:.6g}", int(self.delivered_series[t]),
                            f"{mean:.6g}" if n else mean])


def detect_stability(backlog, arrival_volume: float, threshold: float = DEFAULT_SLOPE_THRESHOLD) -> str:
    """"stable" or "unstable" from the backlog trend over the last half.

    The least-squares slope (packets per slot per slot) is divided by the
    mean arrival volume (packets per slot) before the comparison, so the
    test reads "backlog grows by more than ``threshold`` of the offered load".
    """
    series = np.asarray(backlog, dtype=float)
    if len(series) < MIN_STABILITY_SLOTS:
        raise ValueError(f"series has {len(series)} slots, need at least {MIN_STABILITY_SLOTS}")
    return "unstable" if backlog_slope(series) / max(arrival_volume, 1.0) > threshold else "stable"


def backlog_slope(backlog) -> float:
    """Least-squares slope of the last half of a backlog series."""
    series = np.asarray(backlog, dtype=float)
    tail = series[len(series) // 2:]
    if len(tail) < 2:
        return 0.0
    x = np.arange(len(tail), dtype=float)
    return float(np.polyfit(x, tail, 1)[0])


class Simulation:
    """Engine for one scenario; ``run`` executes it, ``step`` one slot."""

    def __init__(self, scenario: Scenario, policy: str | None = None, debug: bool = False,
                 route_trace=None, queue_trace=None, early_stop: bool = True, fixed_routes=None,
                 engine: str = "fast"):
        if engine not in ("fast", "reference"):
            raise ValueError(f"unknown engine {engine!r}")
        self.sc = scenario
        # traces and externally fixed routes need the per-slot Python objects
        self.engine = "reference" if (route_trace or queue_trace or fixed_routes) else engine
        self.policy = policy or scenario.policy
        self.debug = debug
        self.route_trace = route_trace
        self.queue_trace = queue_trace
        self.early_stop = early_stop
        self.fixed_routes = fixed_routes  # optional callable(client, slot) -> EmbeddedRoute
        g = scenario.graph
        self.g = g
        self.n = len(g.nodes)
        self.L = len(g.links)
        self.index = g.index
        self.link_index = {l: k for k, l in enumerate(g.links)}
        self.clients = scenario.clients
        self.router = Router(g, self.clients)
        self.node_cap = np.array([float(scenario.effective_proc_capacity(v)) for v in g.nodes])
        self.link_cap = np.array([float(scenario.effective_link_capacity(l)) for l in g.links])
        self.node_cap2 = self.node_cap ** 2
        self.link_cap2 = self.link_cap ** 2
        self.xi = [[float(f.scaling_factor) for f in c.service.functions] for c in self.clients]
        self.r = [[float(f.workload) for f in c.service.functions] for c in self.clients]
        self.zeta = [[f.merging_ratio for f in c.service.functions] for c in self.clients]
        self.M = [len(c.service) for c in self.clients]
        self._compiled: list[dict] = [{} for _ in self.clients]

        # state
        self.slot = 0
        self.vq_node = np.zeros(self.n)
        self.vq_link = np.zeros(self.L)
        self.inflight: list[_Job] = []
        self.link_heaps: list[list] = [[] for _ in range(self.L)]
        self.node_heaps: list[list] = [[] for _ in range(self.n)]
        self.groups: dict[int, _Group] = {}
        self.accum: dict[tuple, list] = {}
        self.batches: dict[int, _Batch] = {}
        self._uid = 0
        self._seq = 0
        self.packets = 0  # packets in the system
        self.work = 0.0
        self.ops = 0
        self.checks = 0

    # -- helpers -----------------------------------------------------------

    def _next_uid(self) -> int:
        self._uid += 1
        return self._uid

    def _path(self, names):
        nodes = tuple(self.index[v] for v in names)
        links = tuple(self.link_index[(a, b)] for a, b in zip(names, names[1:]))
        return nodes, links

    def compile_route(self, c: int, route: EmbeddedRoute) -> _CompiledRoute:
        cr = self._compiled[c].get(route)
        if cr is not None:
            return cr
        tab = self.router.tables[c]
        live = [self._path(p) for p in route.live_paths]
        static = [self._path(p) for p in route.static_paths]
        output = self._path(route.output_path)
        node_load = np.zeros(self.n)
        link_load = np.zeros(self.L)
        for m, p in enumerate(route.processing):
            node_load[self.index[p]] += tab.c_proc[m]
            for k in live[m][1]:
                link_load[k] += tab.c_live[m]
            for k in static[m][1]:
                link_load[k] += tab.c_stat[m]
        for k in output[1]:
            link_load[k] += tab.c_live[-1]
        hops = sum(len(p) - 1 for p in route.live_paths) + len(route.output_path) - 1
        cr = _CompiledRoute(route, live, static, output, node_load, link_load, hops)
        self._compiled[c][route] = cr
        return cr

    def _check(self, ok: bool, what: str) -> None:
        self.checks += 1
        if not ok:
            raise InvariantViolation(f"slot {self.slot}: {what}")

    # -- packet movement ---------------------------------------------------

    def _arrive(self, job: _Job, t: int) -> None:
        """Job is at node ``job.nodes[job.pos]`` at the start of its stay there."""
        if job.pos < len(job.links):
            self._seq += 1
            heapq.heappush(self.link_heaps[job.links[job.pos]], (job.crossed, job.birth, job.uid, self._seq, job))
            return
        if job.kind == LIVE and job.stage == self.M[job.client]:
            self._deliver(job, t)
            return
        grp = self.groups[job.group]
        if job.kind == LIVE:
            grp.live_in += job.count
            grp.crossed = job.crossed
            _merge_comp(grp.comp, job.comp, self.batches, job.pos)
            grp.hops = job.hops + job.pos
        else:
            grp.static_in += job.count
        self._pair(grp)

    def _pair(self, grp: _Group) -> None:
        if grp.zeta == 0:
            ready = grp.live_in - grp.moved
        else:
            ready = min(grp.live_in, grp.static_in // grp.zeta) - grp.moved
        if ready <= 0:
            return
        pending = grp.live_in - grp.moved
        comp = _split_comp(grp.comp, ready / pending, self.batches)
        grp.moved += ready
        if self.debug:
            self._check(grp.moved <= grp.live_in and grp.moved * grp.zeta <= grp.static_in, "pairing over-commits")
        job = _Job(PAIR, grp.client, grp.stage, (grp.node,), (), ready, grp.crossed, grp.birth, grp.uid,
                   comp, grp, grp.route, grp.hops)
        self._seq += 1
        heapq.heappush(self.node_heaps[grp.node], (grp.crossed, grp.birth, grp.uid, self._seq, job))

    def _deliver(self, job: _Job, t: int) -> None:
        c = job.client
        self.delivered[c] += job.count
        self.delivered_slot += job.count
        self.packets -= job.count
        for b, (units, hops) in job.comp.items():
            batch = self.batches.get(b)
            if batch is None:  # rounding residue of a finished batch
                continue
            if self.debug:
                self._check(t - batch.birth >= hops + job.pos, "request credit arrived faster than its hops")
            batch.credit += units
            while batch.completed < batch.requests and batch.credit >= batch.completed + 1 - CREDIT_EPS:
                batch.completed += 1
                if batch.birth >= self.warmup:
                    d = t - batch.birth
                    self.delays.append(d)
                    self.completed[c] += 1
                    self.delay_sum_slot += d
                    self.delay_count_slot += 1
            if batch.completed == batch.requests:
                del self.batches[b]

    def _new_group(self, c, stage, node, route, birth, uid, count) -> int:
        gid = self._next_uid()
        self.groups[gid] = _Group(gid=gid, node=node, zeta=self.zeta[c][stage], expected=count, birth=birth,
                                  uid=uid, route=route, client=c, stage=stage)
        return gid

    def _inject_stage(self, c, stage, cr, count, crossed, birth, uid, comp, t, hops):
        """Live (or output) job of ``stage`` plus its static packets; returns jobs to place."""
        M = self.M[c]
        jobs = []
        if stage == M:
            nodes, links = cr.output
            job = _Job(LIVE, c, stage, nodes, links, count, crossed, birth, uid, comp, 0, cr, hops)
            self.packets += count
            self.work += count * len(links)
            return [job]
        nodes, links = cr.live[stage]
        gid = self._new_group(c, stage, nodes[-1], cr, birth, uid, count)
        job = _Job(LIVE, c, stage, nodes, links, count, crossed, birth, uid, comp, gid, cr, hops)
        self.packets += count
        self.work += count * (len(links) + self.r[c][stage])
        jobs.append(job)
        z = self.zeta[c][stage]
        if z:
            snodes, slinks = cr.static[stage]
            sjob = _Job(STATIC, c, stage, snodes, slinks, count * z, 1, birth, uid, {}, gid, cr)
            self.packets += count * z
            self.work += count * z * len(slinks)
            jobs.append(sjob)
        return jobs

    # -- slot phases -------------------------------------------------------

    def _admit(self, t: int, arrivals) -> None:
        active = [c for c in range(len(self.clients)) if arrivals[c] > 0]
        if not active:
            return
        qn = self.vq_node / self.node_cap2
        ql = self.vq_link / self.link_cap2
        if self.fixed_routes is not None:
            results = [(self.fixed_routes(c, t), None) for c in active]
        else:
            results = self.router.select(qn, ql, self.policy, which=active)
        for c, res in zip(active, results):
            a = int(arrivals[c])
            if res is None:
                self.dropped[c] += a
                continue
            route, weight = res
            cr = self.compile_route(c, route)
            self.a_node += a * cr.node_load
            self.a_link += a * cr.link_load
            if self.debug and weight is not None:
                lw = float(cr.node_load @ qn + cr.link_load @ ql)
                self._check(abs(lw - weight) <= 1e-9 * (1 + abs(lw)), f"route weight {weight} != load weight {lw}")
            if self.route_trace is not None:
                self.route_trace.write(route.trace_line(f"{t}:{c}", self.policy, weight or 0) + "\n")
            uid = self._next_uid()
            self.batches[uid] = _Batch(c, t, a, cr.hops)
            for job in self._inject_stage(c, 0, cr, a, 0, t, uid, {uid: [float(a), 0]}, t, 0):
                self._arrive(job, t)

    def _process(self, t: int) -> None:
        emitted = []
        for v in range(self.n):
            heap = self.node_heaps[v]
            if not heap:
                continue
            budget = self.node_cap[v]
            used = 0.0
            served_max = -1
            while heap:
                key = heap[0]
                job = key[4]
                r = self.r[job.client][job.stage]
                before = job.count
                if r == 0:
                    done = job.count
                else:
                    left = budget - used
                    if left <= EPS:
                        break
                    need = job.count * r - job.progress
                    if need <= left + EPS:
                        done = job.count
                        used += need
                        job.progress = 0.0
                    else:
                        total = job.progress + left
                        done = min(job.count - 1, int(total / r + EPS))
                        job.progress = max(total - done * r, 0.0)
                        used = budget
                served_max = max(served_max, key[0])
                if done == job.count:
                    heapq.heappop(heap)
                if done:
                    self._consume(job, done, t, emitted)
                if done < before:
                    break
            if self.debug:
                self._check(used <= budget * (1 + 1e-9) + EPS, f"node {self.g.nodes[v]} over capacity")
                if heap and served_max >= 0:
                    self._check(served_max <= heap[0][0], "ENTO order violated at a node")
            self.node_used[v] += used
        # output created this slot moves on from the next phase
        for job in emitted:
            self._arrive(job, t)

    def _consume(self, job: _Job, done: int, t: int, emitted: list) -> None:
        """Process ``done`` paired live packets of ``job``."""
        c, m = job.client, job.stage
        grp: _Group = job.group
        grp.consumed += done
        if self.debug:
            self._check(grp.consumed <= grp.live_in and grp.consumed * grp.zeta <= grp.static_in,
                        "processing without enough matched static packets")
        share = done / job.count
        comp = _split_comp(job.comp, share, self.batches) if done < job.count else job.comp
        job.count -= done
        self.ops += done
        z = self.zeta[c][m]
        self.packets -= done * (1 + z)
        self.work -= done * self.r[c][m]
        if grp.consumed == grp.expected:
            del self.groups[grp.gid]
        key = (c, job.nodes[0], m)
        acc = self.accum.get(key)
        if acc is None:
            acc = self.accum[key] = [0.0, deque()]
        mass = done * self.xi[c][m]
        acc[0] += mass
        acc[1].append([mass, comp, job.hops, job.route, job.crossed, job.birth, job.uid])
        whole = int(acc[0] + CREDIT_EPS)
        if whole <= 0:
            return
        acc[0] -= whole
        if acc[0] < 0:
            acc[0] = 0.0
        out_comp: dict = {}
        need = float(whole)
        last = None
        fifo = acc[1]
        while need > CREDIT_EPS and fifo:
            entry = fifo[0]
            last = entry
            take = min(need, entry[0])
            frac = take / entry[0] if entry[0] > 0 else 1.0
            if frac >= 1 - 1e-12:
                _merge_comp(out_comp, entry[1], self.batches)
                fifo.popleft()
            else:
                _merge_comp(out_comp, _split_comp(entry[1], frac, self.batches), self.batches)
                entry[0] -= take
            need -= take
        if acc[0] <= CREDIT_EPS and fifo:
            for entry in fifo:
                _merge_comp(out_comp, entry[1], self.batches)
            fifo.clear()
            acc[0] = 0.0
        # emitted packets follow the route of the job that triggered them
        cr = job.route
        new = self._inject_stage(c, m + 1, cr, whole, job.crossed + 1, job.birth, job.uid, out_comp, t, job.hops)
        emitted.extend(new)

    def _transmit(self, t: int) -> None:
        moved = []
        for k in range(self.L):
            heap = self.link_heaps[k]
            if not heap:
                continue
            budget = self.link_cap[k]
            left = budget
            served_max = -1
            while heap and left > EPS:
                key = heap[0]
                job = key[4]
                total = job.progress + left
                done = min(job.count, int(total + EPS))
                if done == job.count:
                    left -= job.count - job.progress
                    job.progress = 0.0
                    heapq.heappop(heap)
                    out = job
                else:
                    job.progress = total - done
                    left = 0.0
                    if done == 0:
                        break
                    share = done / job.count
                    out = _Job(job.kind, job.client, job.stage, job.nodes, job.links, done, job.crossed,
                               job.birth, job.uid, _split_comp(job.comp, share, self.batches) if job.comp else {}, job.group,
                               job.route, job.hops)
                    out.pos = job.pos
                    job.count -= done
                served_max = max(served_max, key[0])
                out.pos += 1
                out.crossed += 1
                self.ops += done
                self.work -= done
                moved.append(out)
            used = budget - max(left, 0.0)
            if self.debug:
                self._check(used <= budget * (1 + 1e-9) + EPS, f"link {self.g.links[k]} over capacity")
                if heap and served_max >= 0:
                    self._check(served_max <= heap[0][0], "ENTO order violated on a link")
            self.link_used[k] += used
        self.inflight = moved

    def _update_queues(self) -> None:
        new_node = np.maximum(self.vq_node - self.node_cap + self.a_node, 0.0)
        new_link = np.maximum(self.vq_link - self.link_cap + self.a_link, 0.0)
        if self.debug:
            for old, cap, a, new in ((self.vq_node, self.node_cap, self.a_node, new_node),
                                     (self.vq_link, self.link_cap, self.a_link, new_link)):
                expect = [max(o - c + x, 0.0) for o, c, x in zip(old, cap, a)]
                self._check(bool(np.all(new >= 0)), "negative virtual queue")
                self._check(np.allclose(new, expect, rtol=0, atol=1e-9), "virtual queue update mismatch")
        self.vq_node, self.vq_link = new_node, new_link

    # -- driver ------------------------------------------------------------

    def run(self, slots: int | None = None) -> MetricsRecord:
        sc = self.sc
        T = sc.slot_count if slots is None else slots
        self.warmup = sc.warmup if sc.warmup is not None and sc.warmup < T else min(10_000, T // 10)
        nc = len(self.clients)
        streams = client_streams(sc.seed, nc)
        arrivals = np.stack(
            [draw_arrivals(c, rng, sc.arrival_cap(c), size=T) for c, rng in zip(self.clients, streams)]
        ) if nc else np.zeros((0, T), dtype=np.int64)
        if self.engine == "fast":
            return self._run_fast(T, arrivals)
        self.delivered = np.zeros(nc, dtype=np.int64)
        self.completed = np.zeros(nc, dtype=np.int64)
        self.dropped = np.zeros(nc, dtype=np.int64)
        self.delays: list[int] = []
        self.node_used = np.zeros(self.n)
        self.link_used = np.zeros(self.L)
        backlog = np.zeros(T, dtype=np.int64)
        work = np.zeros(T)
        delivered_series = np.zeros(T, dtype=np.int64)
        dsum = np.zeros(T)
        dcount = np.zeros(T, dtype=np.int64)
        injected = 0
        stopped = False
        t = 0
        for t in range(T):
            self.slot = t
            self.delivered_slot = 0
            self.delay_sum_slot = 0
            self.delay_count_slot = 0
            self.a_node = np.zeros(self.n)
            self.a_link = np.zeros(self.L)
            arriving, self.inflight = self.inflight, []
            for job in arriving:
                self._arrive(job, t)
            self._admit(t, arrivals[:, t])
            self._process(t)
            self._transmit(t)
            self._update_queues()
            if self.queue_trace is not None:
                w = csv.writer(self.queue_trace)
                for row in self._queue_rows(t):
                    w.writerow(row)
            backlog[t] = self.packets
            work[t] = self.work
            delivered_series[t] = self.delivered_slot
            dsum[t] = self.delay_sum_slot
            dcount[t] = self.delay_count_slot
            injected += int(arrivals[:, t].sum())
            if self.early_stop and t > self.warmup and injected > 0:
                rate = injected / (t + 1)
                if self.packets > UNSTABLE_DELAY * rate * self._packets_per_request():
                    stopped = True
                    break
        n_slots = t + 1 if T else 0
        span = max(n_slots, 1)
        return MetricsRecord(
            policy=self.policy,
            slots=n_slots,
            slots_requested=T,
            warmup=self.warmup,
            arrivals=arrivals[:, :n_slots].sum(axis=1) if nc else np.zeros(0),
            dropped=self.dropped,
            delivered_packets=self.delivered,
            completed_requests=self.completed,
            delays=np.asarray(self.delays, dtype=np.int64),
            backlog=backlog[:n_slots],
            work=work[:n_slots],
            delivered_series=delivered_series[:n_slots],
            delay_sum_series=dsum[:n_slots],
            delay_count_series=dcount[:n_slots],
            node_utilization=self.node_used / (span * self.node_cap),
            link_utilization=self.link_used / (span * self.link_cap),
            arrival_volume=float(sum(float(c.arrival_rate) for c in self.clients)),
            stopped_early=stopped,
            operations=self.ops,
            checks=self.checks,
        )

    def _run_fast(self, T: int, arrivals: np.ndarray) -> MetricsRecord:
        from .engine import OVERFLOW, STOPPED, run_kernel
        from .routing import _MODE, FLOAT_TOL

        nc = len(self.clients)
        Mmax = max(self.M, default=0)
        pad = lambda rows, w, dtype: np.array([list(r) + [0] * (w - len(r)) for r in rows], dtype=dtype).reshape(nc, w)
        tabs = self.router.tables
        smask = np.zeros((nc, Mmax, self.n), dtype=np.bool_)
        for c, tab in enumerate(tabs):
            smask[c, : self.M[c]] = tab.smask
        res = run_kernel(
            self.router.adj, self.router.H0, self.router.tails, self.router.heads, self.node_cap, self.link_cap,
            np.array([tab.source for tab in tabs], dtype=np.int64), np.array([tab.dest for tab in tabs], dtype=np.int64),
            np.array(self.M, dtype=np.int64), pad(self.xi, Mmax, float), pad(self.r, Mmax, float),
            pad(self.zeta, Mmax, np.int64), pad([tab.c_live for tab in tabs], Mmax + 1, float),
            pad([tab.c_stat for tab in tabs], Mmax, float), pad([tab.c_proc for tab in tabs], Mmax, float), smask,
            np.ascontiguousarray(arrivals, dtype=np.int64), _MODE[self.policy], self.warmup, self.early_stop,
            self._packets_per_request(), self.debug, FLOAT_TOL, UNSTABLE_DELAY,
            1 << 18, 1 << 19, 1 << 17, 1 << 14, 1 << 12,
        )
        (status, n_slots, backlog, work, delivered_series, dsum, dcount, delivered, completed, dropped, delays,
         node_used, link_used, ops, checks) = res[:15]
        span = max(n_slots, 1)
        self.ops, self.checks = int(ops), int(checks)
        return MetricsRecord(
            policy=self.policy,
            slots=n_slots,
            slots_requested=T,
            warmup=self.warmup,
            arrivals=arrivals[:, :n_slots].sum(axis=1) if nc else np.zeros(0),
            dropped=dropped,
            delivered_packets=delivered,
            completed_requests=completed,
            delays=delays.copy(),
            backlog=backlog[:n_slots].copy(),
            work=work[:n_slots].copy(),
            delivered_series=delivered_series[:n_slots].copy(),
            delay_sum_series=dsum[:n_slots].copy(),
            delay_count_series=dcount[:n_slots].copy(),
            node_utilization=node_used / (span * self.node_cap),
            link_utilization=link_used / (span * self.link_cap),
            arrival_volume=float(sum(float(c.arrival_rate) for c in self.clients)),
            stopped_early=status in (STOPPED, OVERFLOW),
            operations=self.ops,
            checks=self.checks,
        )

    def _packets_per_request(self) -> float:
        """Live + static packets per request, averaged over clients (for the early stop)."""
        vals = []
        for c, cl in enumerate(self.clients):
            kappa = [float(k) for k in cl.service.stage_coefficients()]
            vals.append(sum(kappa[m] * (1 + self.zeta[c][m]) for m in range(self.M[c])) + kappa[-1])
        return max(1.0, float(np.mean(vals)))

    def _queue_rows(self, t):
        for v, q, cap in zip(self.g.nodes, self.vq_node, self.node_cap):
            yield t, v, f"{q:.6g}", f"{q / cap:.6g}"
        for (i, j), q, cap in zip(self.g.links, self.vq_link, self.link_cap):
            yield t, f"{i}->{j}", f"{q:.6g}", f"{q / cap:.6g}"


def run(scenario: Scenario, policy: str | None = None, slots: int | None = None, **kwargs) -> MetricsRecord:
    return Simulation(scenario, policy, **kwargs).run(slots)


def summary_row(scenario: Scenario, rec: MetricsRecord, cache_index: int | None = None) -> dict:
    rate = float(scenario.clients[0].arrival_rate) if scenario.clients else 0.0
    return {
        "policy": rec.policy,
        "lambda": rate,
        "alpha_proc": float(scenario.alpha_proc),
        "alpha_tx": float(scenario.alpha_tx),
        "cache_index": "" if cache_index is None else cache_index,
        "throughput": rec.throughput,
        "mean_delay": rec.mean_delay,
        # short runs carry no stability verdict
        "stable": int(rec.stable) if rec.stopped_early or rec.slots >= MIN_STABILITY_SLOTS else "",
        "slots": rec.slots,
        "seed": scenario.seed,
    }


def write_summary(rows, path) -> None:
    path = Path(path)
    rows = list(rows)
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)

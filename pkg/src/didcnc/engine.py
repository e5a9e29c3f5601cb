"""Compiled slot loop (numba); same semantics as :class:`didcnc.simulator.Simulation`.

The reference engine in ``simulator.py`` is the readable version; this one
mirrors it operation for operation (same job splits, same heap keys, same
floating-point expressions) so that the two produce identical trajectories.
All state lives in preallocated pools; running out of a pool ends the run
with ``OVERFLOW`` (only happens with backlogs far past any stable regime).
"""
from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict

from .routing import UNREACHABLE, _apsp, _select_route

LIVE, STATIC, PAIR = 0, 1, 2
EPS = 1e-9
CREDIT_EPS = 1e-6
DONE, STOPPED, OVERFLOW = 0, 1, 2

# integer counters
_UID, _SEQ, _PACKETS, _OPS, _CHECKS, _JTOP, _CTOP, _GTOP, _KTOP, _ROUTES, _OVF, _NDELAY = range(12)


@njit(cache=True)
def run_kernel(adj, H0, link_tail, link_head, node_cap, link_cap,
               src, dst, Ms, xi, rr, zeta, c_live, c_stat, c_proc, smask,
               arrivals, mode, warmup, early_stop, ppr, debug, tol, unstable_delay,
               job_cap, credit_cap, group_cap, heap_cap, route_cap):
    n = node_cap.shape[0]
    L = link_cap.shape[0]
    nc = arrivals.shape[0]
    T = arrivals.shape[1]
    Mmax = xi.shape[1]
    S = 2 * Mmax + 1
    inf = np.inf

    link_of = np.full((n, n), -1, np.int64)
    for k in range(L):
        link_of[link_tail[k], link_head[k]] = k
    node_cap2 = node_cap ** 2
    link_cap2 = link_cap ** 2

    I = np.zeros(16, np.int64)
    F = np.zeros(4)  # 0 work, 1 delay sum this slot

    # jobs
    j_kind = np.zeros(job_cap, np.int64)
    j_client = np.zeros(job_cap, np.int64)
    j_stage = np.zeros(job_cap, np.int64)
    j_route = np.zeros(job_cap, np.int64)
    j_seg = np.zeros(job_cap, np.int64)
    j_len = np.zeros(job_cap, np.int64)  # number of links of the path
    j_pos = np.zeros(job_cap, np.int64)
    j_count = np.zeros(job_cap, np.int64)
    j_crossed = np.zeros(job_cap, np.int64)
    j_birth = np.zeros(job_cap, np.int64)
    j_uid = np.zeros(job_cap, np.int64)
    j_group = np.zeros(job_cap, np.int64)
    j_comp = np.zeros(job_cap, np.int64)
    j_seq = np.zeros(job_cap, np.int64)
    j_hops = np.zeros(job_cap, np.int64)
    j_progress = np.zeros(job_cap)
    j_free = np.arange(job_cap - 1, -1, -1).astype(np.int64)
    I[_JTOP] = job_cap

    # credit entries (batch id -> units, hops) as linked lists
    cr_batch = np.zeros(credit_cap, np.int64)
    cr_units = np.zeros(credit_cap)
    cr_hops = np.zeros(credit_cap, np.int64)
    cr_next = np.zeros(credit_cap, np.int64)
    cr_free = np.arange(credit_cap - 1, -1, -1).astype(np.int64)
    I[_CTOP] = credit_cap

    # pairing groups
    g_node = np.zeros(group_cap, np.int64)
    g_zeta = np.zeros(group_cap, np.int64)
    g_expected = np.zeros(group_cap, np.int64)
    g_crossed = np.zeros(group_cap, np.int64)
    g_birth = np.zeros(group_cap, np.int64)
    g_uid = np.zeros(group_cap, np.int64)
    g_live = np.zeros(group_cap, np.int64)
    g_static = np.zeros(group_cap, np.int64)
    g_moved = np.zeros(group_cap, np.int64)
    g_consumed = np.zeros(group_cap, np.int64)
    g_comp = np.zeros(group_cap, np.int64)
    g_hops = np.zeros(group_cap, np.int64)
    g_route = np.zeros(group_cap, np.int64)
    g_client = np.zeros(group_cap, np.int64)
    g_stage = np.zeros(group_cap, np.int64)
    g_free = np.arange(group_cap - 1, -1, -1).astype(np.int64)
    I[_GTOP] = group_cap

    # accumulator contributions (FIFO per client/node/stage)
    k_mass = np.zeros(group_cap)
    k_comp = np.zeros(group_cap, np.int64)
    k_next = np.zeros(group_cap, np.int64)
    k_free = np.arange(group_cap - 1, -1, -1).astype(np.int64)
    I[_KTOP] = group_cap
    acc_mass = np.zeros((nc, n, Mmax))
    acc_head = np.full((nc, n, Mmax), -1, np.int64)
    acc_tail = np.full((nc, n, Mmax), -1, np.int64)

    # batches: id = slot * nc + client
    b_requests = np.zeros(T * nc, np.int64)
    b_credit = np.zeros(T * nc)
    b_completed = np.zeros(T * nc, np.int64)
    uid_batch = Dict.empty(key_type=types.int64, value_type=types.int64)

    # routes
    rt_client = np.zeros(route_cap, np.int64)
    rt_procs = np.zeros((route_cap, Mmax), np.int64)
    rt_sources = np.zeros((route_cap, Mmax), np.int64)
    rt_paths = np.full((route_cap, S, n), -1, np.int64)
    rt_plen = np.zeros((route_cap, S), np.int64)
    rt_links = np.full((route_cap, S, n), -1, np.int64)
    rt_node_load = np.zeros((route_cap, n))
    rt_link_load = np.zeros((route_cap, L))
    route_index = Dict.empty(key_type=types.uint64, value_type=types.int64)
    rt_ref = np.zeros(route_cap, np.int64)  # jobs and groups using the route
    rt_hash = np.zeros(route_cap, np.uint64)
    rt_free = np.zeros(route_cap, np.int64)
    n_rt_free = np.zeros(1, np.int64)

    # heaps: links 0..L-1, nodes L..L+n-1
    hq = np.zeros((L + n, heap_cap), np.int64)
    hs = np.zeros(L + n, np.int64)

    vq_node = np.zeros(n)
    vq_link = np.zeros(L)
    a_node = np.zeros(n)
    a_link = np.zeros(L)
    node_used = np.zeros(n)
    link_used = np.zeros(L)
    delivered = np.zeros(nc, np.int64)
    completed = np.zeros(nc, np.int64)
    dropped = np.zeros(nc, np.int64)
    total_arrivals = 0
    for c in range(nc):
        for t in range(T):
            total_arrivals += arrivals[c, t]
    delays = np.zeros(total_arrivals + 1, np.int64)
    backlog = np.zeros(T, np.int64)
    work = np.zeros(T)
    delivered_series = np.zeros(T, np.int64)
    dsum = np.zeros(T)
    dcount = np.zeros(T, np.int64)
    delivered_slot = np.zeros(1, np.int64)
    dcount_slot = np.zeros(1, np.int64)
    inflight = np.zeros(job_cap, np.int64)
    n_inflight = 0
    moved = np.zeros(job_cap, np.int64)
    emitted = np.zeros(job_cap, np.int64)
    n_emitted = np.zeros(1, np.int64)

    # -- pools ------------------------------------------------------------

    def check(ok):
        I[_CHECKS] += 1
        return ok

    def next_uid():
        I[_UID] += 1
        return I[_UID]

    def new_job():
        if I[_JTOP] == 0:
            I[_OVF] = -1
            return -1
        I[_JTOP] -= 1
        j = j_free[I[_JTOP]]
        j_progress[j] = 0.0
        j_pos[j] = 0
        return j

    def free_job(j):
        rt_ref[j_route[j]] -= 1
        j_free[I[_JTOP]] = j
        I[_JTOP] += 1

    def new_credit(b, units, hops):
        if I[_CTOP] == 0:
            I[_OVF] = -1
            return -1
        I[_CTOP] -= 1
        e = cr_free[I[_CTOP]]
        cr_batch[e] = b
        cr_units[e] = units
        cr_hops[e] = hops
        cr_next[e] = -1
        return e

    def free_credits(head):
        e = head
        while e >= 0:
            nxt = cr_next[e]
            cr_free[I[_CTOP]] = e
            I[_CTOP] += 1
            e = nxt

    def split_comp(head, share):
        out = -1
        tail = -1
        e = head
        while e >= 0:
            if cr_batch[e] not in uid_batch:  # finished batches take no more credit
                e = cr_next[e]
                continue
            mv = cr_units[e] * share
            x = new_credit(cr_batch[e], mv, cr_hops[e])
            if x < 0:
                return out
            cr_units[e] -= mv
            if tail < 0:
                out = x
            else:
                cr_next[tail] = x
            tail = x
            e = cr_next[e]
        return out

    def merge_comp(into, head, extra):
        e = head
        while e >= 0:
            b = cr_batch[e]
            if b not in uid_batch:
                e = cr_next[e]
                continue
            x = into
            last = -1
            found = -1
            while x >= 0:
                if cr_batch[x] == b:
                    found = x
                    break
                last = x
                x = cr_next[x]
            if found >= 0:
                cr_units[found] += cr_units[e]
                h = cr_hops[e] + extra
                if h < cr_hops[found]:
                    cr_hops[found] = h
            else:
                y = new_credit(b, cr_units[e], cr_hops[e] + extra)
                if y < 0:
                    return into
                if last < 0:
                    into = y
                else:
                    cr_next[last] = y
            e = cr_next[e]
        return into

    def less(a, b):
        if j_crossed[a] != j_crossed[b]:
            return j_crossed[a] < j_crossed[b]
        if j_birth[a] != j_birth[b]:
            return j_birth[a] < j_birth[b]
        if j_uid[a] != j_uid[b]:
            return j_uid[a] < j_uid[b]
        return j_seq[a] < j_seq[b]

    def hpush(q, j):
        I[_SEQ] += 1
        j_seq[j] = I[_SEQ]
        if hs[q] >= heap_cap:
            I[_OVF] = -1
            return
        i = hs[q]
        hs[q] += 1
        while i > 0:
            p = (i - 1) // 2
            if less(j, hq[q, p]):
                hq[q, i] = hq[q, p]
                i = p
            else:
                break
        hq[q, i] = j

    def hpop(q):
        top = hq[q, 0]
        hs[q] -= 1
        size = hs[q]
        if size > 0:
            last = hq[q, size]
            i = 0
            while True:
                l = 2 * i + 1
                if l >= size:
                    break
                r = l + 1
                m = l
                if r < size and less(hq[q, r], hq[q, l]):
                    m = r
                if less(hq[q, m], last):
                    hq[q, i] = hq[q, m]
                    i = m
                else:
                    break
            hq[q, i] = last
        return top

    # -- packet movement ----------------------------------------------------

    def job_node(j):
        return rt_paths[j_route[j], j_seg[j], j_pos[j]]

    def deliver(j, t):
        c = j_client[j]
        delivered[c] += j_count[j]
        delivered_slot[0] += j_count[j]
        I[_PACKETS] -= j_count[j]
        e = j_comp[j]
        while e >= 0:
            bid = -1
            if cr_batch[e] in uid_batch:
                bid = uid_batch[cr_batch[e]]
            if bid >= 0:
                birth = bid // nc
                if debug:
                    if not check(t - birth >= cr_hops[e] + j_pos[j]):
                        raise AssertionError("request credit arrived faster than its hops")
                b_credit[bid] += cr_units[e]
                while b_completed[bid] < b_requests[bid] and b_credit[bid] >= b_completed[bid] + 1 - CREDIT_EPS:
                    b_completed[bid] += 1
                    if birth >= warmup:
                        d = t - birth
                        delays[I[_NDELAY]] = d
                        I[_NDELAY] += 1
                        completed[c] += 1
                        F[1] += d
                        dcount_slot[0] += 1
                if b_completed[bid] == b_requests[bid]:
                    del uid_batch[cr_batch[e]]
            e = cr_next[e]
        free_credits(j_comp[j])
        free_job(j)

    def pair(g):
        if g_zeta[g] == 0:
            ready = g_live[g] - g_moved[g]
        else:
            ready = min(g_live[g], g_static[g] // g_zeta[g]) - g_moved[g]
        if ready <= 0:
            return
        pending = g_live[g] - g_moved[g]
        comp = split_comp(g_comp[g], ready / pending)
        g_moved[g] += ready
        if debug:
            if not check(g_moved[g] <= g_live[g] and g_moved[g] * g_zeta[g] <= g_static[g]):
                raise AssertionError("pairing over-commits")
        j = new_job()
        if j < 0:
            return
        j_kind[j] = PAIR
        j_client[j] = g_client[g]
        j_stage[j] = g_stage[g]
        j_route[j] = g_route[g]
        rt_ref[g_route[g]] += 1
        j_seg[j] = -1
        j_len[j] = 0
        j_count[j] = ready
        j_crossed[j] = g_crossed[g]
        j_birth[j] = g_birth[g]
        j_uid[j] = g_uid[g]
        j_comp[j] = comp
        j_group[j] = g
        j_hops[j] = g_hops[g]
        hpush(L + g_node[g], j)

    def arrive(j, t):
        if j_pos[j] < j_len[j]:
            k = rt_links[j_route[j], j_seg[j], j_pos[j]]
            hpush(k, j)
            return
        c = j_client[j]
        if j_kind[j] == LIVE and j_stage[j] == Ms[c]:
            deliver(j, t)
            return
        g = j_group[j]
        if j_kind[j] == LIVE:
            g_live[g] += j_count[j]
            g_crossed[g] = j_crossed[j]
            g_comp[g] = merge_comp(g_comp[g], j_comp[j], j_pos[j])
            g_hops[g] = j_hops[j] + j_pos[j]
            free_credits(j_comp[j])
        else:
            g_static[g] += j_count[j]
        free_job(j)
        pair(g)

    def new_group(c, stage, node, route, birth, uid, count):
        next_uid()
        if I[_GTOP] == 0:
            I[_OVF] = -1
            return -1
        I[_GTOP] -= 1
        g = g_free[I[_GTOP]]
        g_node[g] = node
        g_zeta[g] = zeta[c, stage]
        g_expected[g] = count
        g_crossed[g] = -1
        g_birth[g] = birth
        g_uid[g] = uid
        g_live[g] = 0
        g_static[g] = 0
        g_moved[g] = 0
        g_consumed[g] = 0
        g_comp[g] = -1
        g_hops[g] = 0
        g_route[g] = route
        rt_ref[route] += 1
        g_client[g] = c
        g_stage[g] = stage
        return g

    def make_job(kind, c, stage, route, seg, count, crossed, birth, uid, comp, group, hops):
        j = new_job()
        if j < 0:
            return -1
        j_kind[j] = kind
        j_client[j] = c
        j_stage[j] = stage
        j_route[j] = route
        rt_ref[route] += 1
        j_seg[j] = seg
        j_len[j] = rt_plen[route, seg] - 1
        j_count[j] = count
        j_crossed[j] = crossed
        j_birth[j] = birth
        j_uid[j] = uid
        j_comp[j] = comp
        j_group[j] = group
        j_hops[j] = hops
        return j

    def inject_stage(c, stage, route, count, crossed, birth, uid, comp, hops, out):
        """Jobs of ``stage`` go to ``out``; returns how many were written."""
        M = Ms[c]
        if stage == M:
            j = make_job(LIVE, c, stage, route, 2 * M, count, crossed, birth, uid, comp, -1, hops)
            if j < 0:
                return 0
            I[_PACKETS] += count
            F[0] += count * j_len[j]
            out[0] = j
            return 1
        seg = 2 * stage
        node = rt_paths[route, seg, rt_plen[route, seg] - 1]
        g = new_group(c, stage, node, route, birth, uid, count)
        if g < 0:
            return 0
        j = make_job(LIVE, c, stage, route, seg, count, crossed, birth, uid, comp, g, hops)
        if j < 0:
            return 0
        I[_PACKETS] += count
        F[0] += count * (j_len[j] + rr[c, stage])
        out[0] = j
        z = zeta[c, stage]
        if z:
            s = make_job(STATIC, c, stage, route, seg + 1, count * z, 1, birth, uid, -1, g, 0)
            if s < 0:
                return 1
            I[_PACKETS] += count * z
            F[0] += count * z * j_len[s]
            out[1] = s
            return 2
        return 1

    tmp = np.zeros(2, np.int64)

    def route_id(c, procs, sources, paths, plen):
        M = Ms[c]
        h = np.uint64(1469598103934665603)
        mul = np.uint64(1099511628211)
        h = (h ^ np.uint64(c + 1)) * mul
        for m in range(M):
            h = (h ^ np.uint64(procs[m] + 7)) * mul
            h = (h ^ np.uint64(sources[m] + 11)) * mul
        for k in range(2 * M + 1):
            for x in range(plen[k]):
                h = (h ^ np.uint64(paths[k, x] + 13)) * mul
            h = (h ^ np.uint64(977)) * mul
        rid = -1
        if h in route_index:
            rid = route_index[h]
        if rid >= 0:
            same = rt_client[rid] == c
            if same:
                for k in range(2 * M + 1):
                    if rt_plen[rid, k] != plen[k]:
                        same = False
                        break
                    for x in range(plen[k]):
                        if rt_paths[rid, k, x] != paths[k, x]:
                            same = False
                            break
                if same:
                    for m in range(M):
                        if rt_procs[rid, m] != procs[m] or rt_sources[rid, m] != sources[m]:
                            same = False
            if same:
                return rid
        if I[_ROUTES] < route_cap:
            rid = I[_ROUTES]
            I[_ROUTES] += 1
        else:
            if n_rt_free[0] == 0:
                # recycle every route no job or group refers to any more
                for x in range(route_cap):
                    if rt_ref[x] == 0:
                        if rt_hash[x] in route_index and route_index[rt_hash[x]] == x:
                            del route_index[rt_hash[x]]
                        rt_free[n_rt_free[0]] = x
                        n_rt_free[0] += 1
                if n_rt_free[0] == 0:
                    I[_OVF] = -1
                    return -1
            n_rt_free[0] -= 1
            rid = rt_free[n_rt_free[0]]
            rt_paths[rid] = -1
            rt_links[rid] = -1
            rt_node_load[rid] = 0.0
            rt_link_load[rid] = 0.0
        rt_hash[rid] = h
        if h not in route_index:
            route_index[h] = rid
        rt_client[rid] = c
        for m in range(M):
            rt_procs[rid, m] = procs[m]
            rt_sources[rid, m] = sources[m]
        for k in range(2 * M + 1):
            rt_plen[rid, k] = plen[k]
            for x in range(plen[k]):
                rt_paths[rid, k, x] = paths[k, x]
            for x in range(plen[k] - 1):
                rt_links[rid, k, x] = link_of[paths[k, x], paths[k, x + 1]]
        for m in range(M):
            rt_node_load[rid, procs[m]] += c_proc[c, m]
            for x in range(plen[2 * m] - 1):
                rt_link_load[rid, rt_links[rid, 2 * m, x]] += c_live[c, m]
            for x in range(plen[2 * m + 1] - 1):
                rt_link_load[rid, rt_links[rid, 2 * m + 1, x]] += c_stat[c, m]
        for x in range(plen[2 * M] - 1):
            rt_link_load[rid, rt_links[rid, 2 * M, x]] += c_live[c, M]
        return rid

    # -- slot phases ----------------------------------------------------------

    def consume(j, done, t):
        c = j_client[j]
        m = j_stage[j]
        g = j_group[j]
        g_consumed[g] += done
        if debug:
            if not check(g_consumed[g] <= g_live[g] and g_consumed[g] * g_zeta[g] <= g_static[g]):
                raise AssertionError("processing without enough matched static packets")
        share = done / j_count[j]
        if done < j_count[j]:
            comp = split_comp(j_comp[j], share)
        else:
            comp = j_comp[j]
            j_comp[j] = -1
        j_count[j] -= done
        I[_OPS] += done
        z = zeta[c, m]
        I[_PACKETS] -= done * (1 + z)
        F[0] -= done * rr[c, m]
        if g_consumed[g] == g_expected[g]:
            free_credits(g_comp[g])
            g_comp[g] = -1
            g_free[I[_GTOP]] = g
            rt_ref[g_route[g]] -= 1
            I[_GTOP] += 1
        v = rt_procs[j_route[j], m]
        mass = done * xi[c, m]
        acc_mass[c, v, m] += mass
        if I[_KTOP] == 0:
            I[_OVF] = -1
            return
        I[_KTOP] -= 1
        kk = k_free[I[_KTOP]]
        k_mass[kk] = mass
        k_comp[kk] = comp
        k_next[kk] = -1
        if acc_tail[c, v, m] < 0:
            acc_head[c, v, m] = kk
        else:
            k_next[acc_tail[c, v, m]] = kk
        acc_tail[c, v, m] = kk
        whole = int(acc_mass[c, v, m] + CREDIT_EPS)
        if whole <= 0:
            return
        acc_mass[c, v, m] -= whole
        if acc_mass[c, v, m] < 0:
            acc_mass[c, v, m] = 0.0
        out_comp = -1
        need = float(whole)
        while need > CREDIT_EPS and acc_head[c, v, m] >= 0:
            kk = acc_head[c, v, m]
            take = min(need, k_mass[kk])
            frac = take / k_mass[kk] if k_mass[kk] > 0 else 1.0
            if frac >= 1 - 1e-12:
                out_comp = merge_comp(out_comp, k_comp[kk], 0)
                free_credits(k_comp[kk])
                acc_head[c, v, m] = k_next[kk]
                if acc_head[c, v, m] < 0:
                    acc_tail[c, v, m] = -1
                k_free[I[_KTOP]] = kk
                I[_KTOP] += 1
            else:
                part = split_comp(k_comp[kk], frac)
                out_comp = merge_comp(out_comp, part, 0)
                free_credits(part)
                k_mass[kk] -= take
            need -= take
        if acc_mass[c, v, m] <= CREDIT_EPS and acc_head[c, v, m] >= 0:
            kk = acc_head[c, v, m]
            while kk >= 0:
                out_comp = merge_comp(out_comp, k_comp[kk], 0)
                free_credits(k_comp[kk])
                nxt = k_next[kk]
                k_free[I[_KTOP]] = kk
                I[_KTOP] += 1
                kk = nxt
            acc_head[c, v, m] = -1
            acc_tail[c, v, m] = -1
            acc_mass[c, v, m] = 0.0
        cnt = inject_stage(c, m + 1, j_route[j], whole, j_crossed[j] + 1, j_birth[j], j_uid[j], out_comp,
                           j_hops[j], tmp)
        for x in range(cnt):
            emitted[n_emitted[0]] = tmp[x]
            n_emitted[0] += 1

    stopped = DONE
    injected = 0
    t_end = 0
    W = np.zeros((n, n))
    H = np.zeros((n, n), np.int64)
    wmat = np.full((n, n), inf)
    for t in range(T):
        t_end = t
        delivered_slot[0] = 0
        dcount_slot[0] = 0
        F[1] = 0.0
        a_node[:] = 0.0
        a_link[:] = 0.0

        # 1. arrivals from the previous slot's transmissions
        for x in range(n_inflight):
            arrive(inflight[x], t)
        n_inflight = 0

        # 2. admission
        any_active = False
        for c in range(nc):
            if arrivals[c, t] > 0:
                any_active = True
        if any_active:
            qn = vq_node / node_cap2
            ql = vq_link / link_cap2
            for k in range(L):
                wmat[link_tail[k], link_head[k]] = ql[k]
            W, H = _apsp(wmat, adj, 0.0, inf, UNREACHABLE)
            for c in range(nc):
                a = arrivals[c, t]
                if a <= 0:
                    continue
                M = Ms[c]
                ok, weight, _, procs, sources, paths, plen = _select_route(
                    W, H, H0, wmat, adj, qn, src[c], dst[c], c_live[c, : M + 1], c_stat[c, :M], c_proc[c, :M],
                    smask[c, :M], mode, tol, 0.0, inf, UNREACHABLE)
                if not ok:
                    dropped[c] += a
                    continue
                rid = route_id(c, procs, sources, paths, plen)
                if rid < 0:
                    break
                for v in range(n):
                    a_node[v] += a * rt_node_load[rid, v]
                for k in range(L):
                    a_link[k] += a * rt_link_load[rid, k]
                if debug:
                    lw = 0.0
                    for v in range(n):
                        lw += rt_node_load[rid, v] * qn[v]
                    for k in range(L):
                        lw += rt_link_load[rid, k] * ql[k]
                    if not check(abs(lw - weight) <= 1e-9 * (1 + abs(lw))):
                        raise AssertionError("route weight differs from load-weighted queues")
                uid = next_uid()
                bid = t * nc + c
                uid_batch[uid] = bid
                b_requests[bid] = a
                comp = new_credit(uid, float(a), 0)
                cnt = inject_stage(c, 0, rid, a, 0, t, uid, comp, 0, tmp)
                j0 = tmp[0]
                j1 = tmp[1]
                if cnt >= 1:
                    arrive(j0, t)
                if cnt >= 2:
                    arrive(j1, t)

        # 3. processing
        n_emitted[0] = 0
        for v in range(n):
            q = L + v
            if hs[q] == 0:
                continue
            budget = node_cap[v]
            used = 0.0
            served_max = -1
            while hs[q] > 0:
                j = hq[q, 0]
                r = rr[j_client[j], j_stage[j]]
                before = j_count[j]
                if r == 0:
                    done = j_count[j]
                else:
                    left = budget - used
                    if left <= EPS:
                        break
                    need = j_count[j] * r - j_progress[j]
                    if need <= left + EPS:
                        done = j_count[j]
                        used += need
                        j_progress[j] = 0.0
                    else:
                        total = j_progress[j] + left
                        done = min(j_count[j] - 1, int(total / r + EPS))
                        j_progress[j] = max(total - done * r, 0.0)
                        used = budget
                if j_crossed[j] > served_max:
                    served_max = j_crossed[j]
                if done == j_count[j]:
                    hpop(q)
                if done:
                    consume(j, done, t)
                    if j_count[j] == 0:
                        free_credits(j_comp[j])
                        free_job(j)
                if done < before:
                    break
            if debug:
                if not check(used <= budget * (1 + 1e-9) + EPS):
                    raise AssertionError("node over capacity")
                if hs[q] > 0 and served_max >= 0:
                    if not check(served_max <= j_crossed[hq[q, 0]]):
                        raise AssertionError("ENTO order violated at a node")
            node_used[v] += used
        for x in range(n_emitted[0]):
            arrive(emitted[x], t)

        # 4. transmission
        n_moved = 0
        for k in range(L):
            if hs[k] == 0:
                continue
            budget = link_cap[k]
            left = budget
            served_max = -1
            while hs[k] > 0 and left > EPS:
                j = hq[k, 0]
                key_crossed = j_crossed[j]
                total = j_progress[j] + left
                done = min(j_count[j], int(total + EPS))
                if done == j_count[j]:
                    left -= j_count[j] - j_progress[j]
                    j_progress[j] = 0.0
                    hpop(k)
                    out = j
                else:
                    j_progress[j] = total - done
                    left = 0.0
                    if done == 0:
                        break
                    share = done / j_count[j]
                    comp = split_comp(j_comp[j], share) if j_comp[j] >= 0 else -1
                    out = make_job(j_kind[j], j_client[j], j_stage[j], j_route[j], j_seg[j], done, j_crossed[j],
                                   j_birth[j], j_uid[j], comp, j_group[j], j_hops[j])
                    if out < 0:
                        break
                    j_pos[out] = j_pos[j]
                    j_count[j] -= done
                if key_crossed > served_max:
                    served_max = key_crossed
                j_pos[out] += 1
                j_crossed[out] += 1
                I[_OPS] += done
                F[0] -= done
                moved[n_moved] = out
                n_moved += 1
            used = budget - max(left, 0.0)
            if debug:
                if not check(used <= budget * (1 + 1e-9) + EPS):
                    raise AssertionError("link over capacity")
                if hs[k] > 0 and served_max >= 0:
                    if not check(served_max <= j_crossed[hq[k, 0]]):
                        raise AssertionError("ENTO order violated on a link")
            link_used[k] += used
        for x in range(n_moved):
            inflight[x] = moved[x]
        n_inflight = n_moved

        # 5. virtual queues
        for v in range(n):
            nv = vq_node[v] - node_cap[v] + a_node[v]
            nv = nv if nv > 0.0 else 0.0
            if debug:
                if not check(nv >= 0):
                    raise AssertionError("negative virtual queue")
            vq_node[v] = nv
        for k in range(L):
            nl = vq_link[k] - link_cap[k] + a_link[k]
            nl = nl if nl > 0.0 else 0.0
            if debug:
                if not check(nl >= 0):
                    raise AssertionError("negative virtual queue")
            vq_link[k] = nl

        backlog[t] = I[_PACKETS]
        work[t] = F[0]
        delivered_series[t] = delivered_slot[0]
        dsum[t] = F[1]
        dcount[t] = dcount_slot[0]
        for c in range(nc):
            injected += arrivals[c, t]
        if I[_OVF]:
            I[_OVF] = t + 1
            stopped = OVERFLOW
            break
        if early_stop and t > warmup and injected > 0:
            rate = injected / (t + 1)
            if I[_PACKETS] > unstable_delay * rate * ppr:
                stopped = STOPPED
                break

    return (stopped, t_end + 1, backlog, work, delivered_series, dsum, dcount, delivered, completed, dropped,
            delays[: I[_NDELAY]], node_used, link_used, I[_OPS], I[_CHECKS], I, hs)

"""Compiled simulator.

Same six-phase step as :class:`nflsim.simcore.reference.World`, on flat
arrays. Edge weights are handled doubled (``2 + |Q_a| + |Q_b|``) so path
costs are exact integers; routing is resolved lazily, one Dijkstra per
destination actually needed in a step.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .draws import DrawStream
from .types import ProbeLog, SimConfig, SimSummary

INF = np.int64(1) << 60

# counter slots
C_CREATED, C_DELIVERED, C_DROPPED, C_HOLDS, C_FREE_TOP, C_NREC = range(6)


@njit(cache=True, nogil=True)
def _dist_to(d, n, adj_ptr, adj_idx, qs, dist, done):
    for i in range(n):
        dist[i] = INF
        done[i] = False
    dist[d] = 0
    for _ in range(n):
        u = -1
        best = INF
        for i in range(n):
            if not done[i] and dist[i] < best:
                best = dist[i]
                u = i
        if u < 0:
            break
        done[u] = True
        for k in range(adj_ptr[u], adj_ptr[u + 1]):
            v = adj_idx[k]
            nd = best + 2 + qs[u] + qs[v]
            if nd < dist[v]:
                dist[v] = nd


@njit(cache=True, nogil=True)
def _run_block(
    t0, sends, targets, holds,
    n, cap, adj_ptr, adj_idx, anom_index, monitors, pair_index, probe_period, warmup,
    qbuf, qhead, qlen,
    p_recip, p_created, p_hops, p_pair, free_stack,
    counters, sent,
    rec_pair, rec_delay, rec_hops, rec_arrival,
    hist, hist_sent, record_history,
):
    c = sends.shape[0]
    m = monitors.shape[0]
    qs = np.empty(n, dtype=np.int64)
    distmat = np.empty((n, n), dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    done = np.empty(n, dtype=np.bool_)
    out_pid = np.empty(n, dtype=np.int64)
    out_to = np.empty(n, dtype=np.int64)
    n_anom = holds.shape[1]

    for i in range(c):
        t = t0 + i
        for a in range(n):
            qs[a] = qlen[a]
        for j in range(n_anom):
            if holds[i, j]:
                counters[C_HOLDS] += 1
        # node steps against the snapshot
        for a in range(n):
            out_pid[a] = -1
            if qlen[a] == 0:
                continue
            j = anom_index[a]
            if j >= 0 and holds[i, j]:
                continue
            pid = qbuf[a, qhead[a]]
            qhead[a] = (qhead[a] + 1) % cap
            qlen[a] -= 1
            d = p_recip[pid]
            if d == a:
                counters[C_DELIVERED] += 1
                pp = p_pair[pid]
                if pp >= 0 and t >= warmup:
                    r = counters[C_NREC]
                    rec_pair[r] = pp
                    rec_delay[r] = t - p_created[pid]
                    rec_hops[r] = p_hops[pid]
                    rec_arrival[r] = t
                    counters[C_NREC] = r + 1
                top = counters[C_FREE_TOP]
                free_stack[top] = pid
                counters[C_FREE_TOP] = top + 1
            else:
                if stamp[d] != t:
                    _dist_to(d, n, adj_ptr, adj_idx, qs, distmat[d], done)
                    stamp[d] = t
                dist = distmat[d]
                nh = -1
                for k in range(adj_ptr[a], adj_ptr[a + 1]):
                    v = adj_idx[k]
                    if 2 + qs[a] + qs[v] + dist[v] == dist[a]:
                        nh = v
                        break
                p_hops[pid] += 1
                out_pid[a] = pid
                out_to[a] = nh
        # arrivals in ascending forwarding-node order
        for a in range(n):
            pid = out_pid[a]
            if pid < 0:
                continue
            b = out_to[a]
            if qlen[b] < cap:
                qbuf[b, (qhead[b] + qlen[b]) % cap] = pid
                qlen[b] += 1
            else:
                counters[C_DROPPED] += 1
                top = counters[C_FREE_TOP]
                free_stack[top] = pid
                counters[C_FREE_TOP] = top + 1
        # background traffic
        for a in range(n):
            if sends[i, a]:
                counters[C_CREATED] += 1
                sent[a] += 1
                if qlen[a] < cap:
                    top = counters[C_FREE_TOP] - 1
                    pid = free_stack[top]
                    counters[C_FREE_TOP] = top
                    p_recip[pid] = targets[i, a]
                    p_created[pid] = t
                    p_hops[pid] = 0
                    p_pair[pid] = -1
                    qbuf[a, (qhead[a] + qlen[a]) % cap] = pid
                    qlen[a] += 1
                else:
                    counters[C_DROPPED] += 1
        # probes
        if t >= warmup and t % probe_period == 0:
            for x in range(m):
                a = monitors[x]
                for y in range(m):
                    if x == y:
                        continue
                    counters[C_CREATED] += 1
                    if qlen[a] < cap:
                        top = counters[C_FREE_TOP] - 1
                        pid = free_stack[top]
                        counters[C_FREE_TOP] = top
                        p_recip[pid] = monitors[y]
                        p_created[pid] = t
                        p_hops[pid] = 0
                        p_pair[pid] = pair_index[x, y]
                        qbuf[a, (qhead[a] + qlen[a]) % cap] = pid
                        qlen[a] += 1
                    else:
                        counters[C_DROPPED] += 1
        if record_history:
            inflight = 0
            for a in range(n):
                inflight += qlen[a]
                hist_sent[i, a] = sends[i, a]
            hist[i, 0] = counters[C_CREATED]
            hist[i, 1] = counters[C_DELIVERED]
            hist[i, 2] = counters[C_DROPPED]
            hist[i, 3] = inflight


def _csr(g):
    ptr = np.zeros(g.node_count + 1, dtype=np.int64)
    idx = []
    for a in g.nodes:
        nb = g.neighbours(a)
        idx.extend(nb)
        ptr[a + 1] = ptr[a] + len(nb)
    return ptr, np.asarray(idx, dtype=np.int64)


def run_compiled(cfg: SimConfig, record_history: bool = False, block: int = 65536) -> SimSummary:
    g = cfg.graph
    n, cap = g.node_count, cfg.queue_capacity
    adj_ptr, adj_idx = _csr(g)
    anom_index = np.full(n, -1, dtype=np.int64)
    for j, a in enumerate(sorted(cfg.anomalous_set)):
        anom_index[a] = j
    monitors = np.asarray(cfg.monitors, dtype=np.int64)
    m = len(monitors)
    pairs = [(int(a), int(b)) for a in monitors for b in monitors if a != b]
    pair_index = np.full((m, m), -1, dtype=np.int64)
    k = 0
    for x in range(m):
        for y in range(m):
            if x != y:
                pair_index[x, y] = k
                k += 1

    qbuf = np.zeros((n, cap), dtype=np.int64)
    qhead = np.zeros(n, dtype=np.int64)
    qlen = np.zeros(n, dtype=np.int64)
    pool = n * cap + n
    p_recip = np.zeros(pool, dtype=np.int64)
    p_created = np.zeros(pool, dtype=np.int64)
    p_hops = np.zeros(pool, dtype=np.int64)
    p_pair = np.zeros(pool, dtype=np.int64)
    free_stack = np.arange(pool - 1, -1, -1, dtype=np.int64)
    counters = np.zeros(6, dtype=np.int64)
    counters[C_FREE_TOP] = pool
    sent = np.zeros(n, dtype=np.int64)

    stream = DrawStream(cfg)
    chunks = []
    hist_parts = []
    sent_parts = []
    t = 0
    while t < cfg.duration:
        c = min(block, cfg.duration - t)
        blk = stream.block(c)
        bound = pool + (c // cfg.probe_period + 1) * len(pairs)
        rec_pair = np.empty(bound, dtype=np.int64)
        rec_delay = np.empty(bound, dtype=np.int64)
        rec_hops = np.empty(bound, dtype=np.int64)
        rec_arrival = np.empty(bound, dtype=np.int64)
        hist = np.zeros((c if record_history else 0, 4), dtype=np.int64)
        hist_sent = np.zeros((c if record_history else 0, n), dtype=np.uint8)
        counters[C_NREC] = 0
        _run_block(
            t, blk.sends, blk.targets, blk.holds,
            n, cap, adj_ptr, adj_idx, anom_index, monitors, pair_index, cfg.probe_period, cfg.warmup,
            qbuf, qhead, qlen,
            p_recip, p_created, p_hops, p_pair, free_stack,
            counters, sent,
            rec_pair, rec_delay, rec_hops, rec_arrival,
            hist, hist_sent, record_history,
        )
        r = counters[C_NREC]
        chunks.append((rec_pair[:r].copy(), rec_delay[:r].copy(), rec_hops[:r].copy(), rec_arrival[:r].copy()))
        if record_history:
            hist_parts.append(hist)
            sent_parts.append(hist_sent)
        t += c

    pair_arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if chunks:
        rp = np.concatenate([ch[0] for ch in chunks])
        cols = [np.concatenate([ch[i] for ch in chunks]) for i in (1, 2, 3)]
    else:
        rp = np.zeros(0, dtype=np.int64)
        cols = [np.zeros(0, dtype=np.int64)] * 3
    probes = ProbeLog(pair_arr[rp, 0], pair_arr[rp, 1], *cols)
    history = None
    if record_history:
        h = np.concatenate(hist_parts) if hist_parts else np.zeros((0, 4), dtype=np.int64)
        history = {
            "created": h[:, 0].copy(),
            "delivered": h[:, 1].copy(),
            "dropped": h[:, 2].copy(),
            "in_flight": h[:, 3].copy(),
            "sent": np.concatenate(sent_parts) if sent_parts else np.zeros((0, n), dtype=np.uint8),
        }
    return SimSummary(
        created=int(counters[C_CREATED]),
        delivered=int(counters[C_DELIVERED]),
        dropped=int(counters[C_DROPPED]),
        in_flight=int(qlen.sum()),
        probes=probes,
        sent_per_node=sent,
        hold_events=int(counters[C_HOLDS]),
        history=history,
    )

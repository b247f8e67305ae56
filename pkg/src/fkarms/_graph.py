"""Compiled graph kernels: union-find, connectivity queries and update rules.

Graphs are given as edge endpoint arrays ``eu``, ``ev`` over ``n`` vertices
(wired boundary classes already contracted to one vertex) plus a CSR
adjacency ``indptr, adj_v, adj_e``.  Random numbers are passed in as
pre-drawn uniform arrays so that every stream comes from a numpy Generator.
"""

import numpy as np
from numba import njit


def build_csr(n, eu, ev):
    """CSR adjacency (neighbour vertex and edge id) of an undirected multigraph."""
    eu = np.asarray(eu, dtype=np.int64)
    ev = np.asarray(ev, dtype=np.int64)
    m = len(eu)
    src = np.concatenate([eu, ev])
    dst = np.concatenate([ev, eu])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=n) if m else np.zeros(n, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)


@njit(cache=True)
def uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def component_labels(n, eu, ev, state):
    """Labels 0..k-1 of the components of the open subgraph, and k."""
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for e in range(len(eu)):
        if state[e]:
            a = uf_find(parent, eu[e])
            b = uf_find(parent, ev[e])
            if a != b:
                if size[a] < size[b]:
                    a, b = b, a
                parent[b] = a
                size[a] += size[b]
    labels = -np.ones(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    k = 0
    for x in range(n):
        r = uf_find(parent, x)
        if labels[r] < 0:
            labels[r] = k
            k += 1
        out[x] = labels[r]
    return out, k


@njit(cache=True)
def count_all_configs(n, eu, ev):
    """Open-edge count and component count of every configuration code.

    Bit i of the code is the state of edge i.
    """
    m = len(eu)
    total = 1 << m
    opened = np.empty(total, dtype=np.int64)
    comps = np.empty(total, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    for code in range(total):
        for x in range(n):
            parent[x] = x
        k = n
        c = 0
        for e in range(m):
            if (code >> e) & 1:
                c += 1
                a = uf_find(parent, eu[e])
                b = uf_find(parent, ev[e])
                if a != b:
                    parent[b] = a
                    k -= 1
        opened[code] = c
        comps[code] = k
    return opened, comps


@njit(cache=True)
def connected_excluding(u, v, skip, indptr, adj_v, adj_e, state, seen_a, seen_b,
                        stamp, qa, qb):
    """Bidirectional search: are ``u`` and ``v`` joined by open edges other than ``skip``?"""
    if u == v:
        return True
    seen_a[u] = stamp
    seen_b[v] = stamp
    qa[0] = u
    qb[0] = v
    ha, ta, hb, tb = 0, 1, 0, 1
    while ha < ta and hb < tb:
        x = qa[ha]
        ha += 1
        for j in range(indptr[x], indptr[x + 1]):
            e = adj_e[j]
            if e == skip or not state[e]:
                continue
            y = adj_v[j]
            if seen_b[y] == stamp:
                return True
            if seen_a[y] != stamp:
                seen_a[y] = stamp
                qa[ta] = y
                ta += 1
        x = qb[hb]
        hb += 1
        for j in range(indptr[x], indptr[x + 1]):
            e = adj_e[j]
            if e == skip or not state[e]:
                continue
            y = adj_v[j]
            if seen_a[y] == stamp:
                return True
            if seen_b[y] != stamp:
                seen_b[y] = stamp
                qb[tb] = y
                tb += 1
    return False


@njit(cache=True)
def heatbath_sweep_kernel(eu, ev, indptr, adj_v, adj_e, state, p, q, uniforms):
    """One systematic-scan heat-bath sweep in edge-index order."""
    n = len(indptr) - 1
    seen_a = np.zeros(n, dtype=np.int64)
    seen_b = np.zeros(n, dtype=np.int64)
    qa = np.empty(n, dtype=np.int64)
    qb = np.empty(n, dtype=np.int64)
    p_free = p / (p + q * (1.0 - p))
    for e in range(len(eu)):
        if q == 1.0:
            prob = p
        else:
            conn = connected_excluding(eu[e], ev[e], e, indptr, adj_v, adj_e, state,
                                       seen_a, seen_b, e + 1, qa, qb)
            prob = p if conn else p_free
        state[e] = 1 if uniforms[e] < prob else 0


@njit(cache=True)
def cluster_step_kernel(n, eu, ev, state, p, q, u_active, u_edge):
    """Chayes-Machta update: activate clusters w.p. 1/q, resample active edges."""
    labels, k = component_labels(n, eu, ev, state)
    active = np.empty(k, dtype=np.bool_)
    for c in range(k):
        active[c] = u_active[c] * q < 1.0
    for e in range(len(eu)):
        if active[labels[eu[e]]] and active[labels[ev[e]]]:
            state[e] = 1 if u_edge[e] < p else 0


@njit(cache=True)
def trajectory_kernel(n, eu, ev, indptr, adj_v, adj_e, state, p, q, cluster, n_samples,
                      thin, seed):
    """Configuration codes (bit i = edge i) of a thinned chain trajectory."""
    np.random.seed(seed)
    m = len(eu)
    out = np.empty(n_samples, dtype=np.int64)
    for s in range(n_samples):
        for _ in range(thin):
            if cluster:
                cluster_step_kernel(n, eu, ev, state, p, q, np.random.random(n),
                                    np.random.random(m))
            else:
                heatbath_sweep_kernel(eu, ev, indptr, adj_v, adj_e, state, p, q,
                                      np.random.random(m))
        code = 0
        for e in range(m):
            code |= np.int64(state[e]) << e
        out[s] = code
    return out

"""Exact small-graph checks: positive association, boundary monotonicity, spatial Markov
property and heat-bath conditionals, by full enumeration.

Events are evaluated on the plain configuration (no wiring), so the same
event can be compared between boundary conditions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import _graph
from .lattice import Region, box, subgraph
from .rcmodel import (FREE, WIRED, BoundaryCondition, ModelParams, exact_distribution,
                      graph_arrays, heatbath_edge_prob)

TOL = 1e-12
ORACLE_QS = (1.0, 1.5, 2.0, 4.0)


@njit(cache=True)
def all_labels(n, eu, ev):
    """Component label (smallest vertex index) of every vertex, for every configuration code."""
    m = len(eu)
    total = 1 << m
    out = np.empty((total, n), dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    for code in range(total):
        for x in range(n):
            parent[x] = x
        for e in range(m):
            if (code >> e) & 1:
                a = _graph.uf_find(parent, eu[e])
                b = _graph.uf_find(parent, ev[e])
                if a < b:
                    parent[b] = a
                elif b < a:
                    parent[a] = b
        for x in range(n):
            out[code, x] = _graph.uf_find(parent, x)
    return out


# --- event catalog --------------------------------------------------------------------


def _cluster_sizes(labels):
    n = labels.shape[1]
    return np.stack([(labels == labels[:, [x]]).sum(axis=1) for x in range(n)], axis=1)


def _events(bits, labels):
    """All catalog events as boolean vectors over configuration codes."""
    m = bits.shape[1]
    n = labels.shape[1]
    opened = bits.sum(axis=1)
    comps = np.array([len(np.unique(row)) for row in labels])
    largest = _cluster_sizes(labels).max(axis=1)
    first, mid, last = 0, n // 2, n - 1
    return {
        "edge_first": bits[:, 0] == 1,
        "edge_mid": bits[:, m // 2] == 1,
        "edge_last": bits[:, m - 1] == 1,
        "half_open": opened * 2 >= m,
        "most_open": opened * 4 >= 3 * m,
        "conn_first_last": labels[:, first] == labels[:, last],
        "conn_first_mid": labels[:, first] == labels[:, mid],
        "conn_mid_last": labels[:, mid] == labels[:, last],
        "has_cycle": opened > n - comps,
        "few_clusters": comps * 2 <= n + 1,
        "big_cluster": largest * 2 > n,
        "spanning": comps == 1,
    }


EVENTS = ("edge_first", "edge_mid", "edge_last", "half_open", "most_open", "conn_first_last",
          "conn_first_mid", "conn_mid_last", "has_cycle", "few_clusters", "big_cluster",
          "spanning")

CATALOG = (
    ("edge_first", "edge_last"), ("edge_first", "conn_first_last"),
    ("edge_mid", "conn_first_mid"), ("edge_last", "conn_mid_last"),
    ("half_open", "most_open"), ("half_open", "has_cycle"),
    ("most_open", "spanning"), ("conn_first_last", "conn_first_mid"),
    ("conn_first_last", "conn_mid_last"), ("conn_first_mid", "conn_mid_last"),
    ("has_cycle", "spanning"), ("has_cycle", "big_cluster"),
    ("few_clusters", "big_cluster"), ("few_clusters", "edge_mid"),
    ("big_cluster", "conn_first_last"), ("spanning", "edge_first"),
    ("edge_first", "half_open"), ("edge_last", "has_cycle"),
    ("most_open", "conn_first_mid"), ("few_clusters", "conn_mid_last"),
)


def bits_matrix(m: int) -> np.ndarray:
    codes = np.arange(1 << m)
    return ((codes[:, None] >> np.arange(m)[None, :]) & 1).astype(np.uint8)


def connected_subgraphs(region: Region = None, max_edges: int = 12) -> list:
    """Every nonempty edge subset of ``region`` whose edges form a connected graph."""
    region = region or box(1)
    c = region.edge_coords
    edges = [((int(a), int(b)), (int(x), int(y))) for a, b, x, y in c]
    out = []
    for size in range(1, min(max_edges, len(edges)) + 1):
        for sub in itertools.combinations(range(len(edges)), size):
            parent = {}

            def find(v):
                while parent.setdefault(v, v) != v:
                    v = parent[v]
                return v

            for i in sub:
                a, b = edges[i]
                parent[find(a)] = find(b)
            roots = {find(v) for i in sub for v in edges[i]}
            if len(roots) == 1:
                out.append(subgraph([edges[i] for i in sub]))
    return out


# --- checks ---------------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    worst: float
    detail: str = ""

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.cases} cases, worst margin {self.worst:.3e}){self.detail}"


@dataclass
class OracleSummary:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        return [c.line() for c in self.checks]

    def to_record(self) -> dict:
        return {c.name: {"passed": c.passed, "cases": c.cases, "worst": c.worst}
                for c in self.checks}


@lru_cache(maxsize=None)
def _graph_data(region: Region):
    n, eu, ev, *_ = graph_arrays(region, FREE)
    labels = all_labels(n, eu, ev)
    bits = bits_matrix(region.n_edges)
    return bits, labels, _events(bits, labels)


def fkg_check(regions, qs=ORACLE_QS, bcs=(FREE, WIRED)) -> CheckResult:
    """φ[A∩B] - φ[A]φ[B] ≥ 0 for every catalog pair, region, q and boundary condition."""
    worst, cases = np.inf, 0
    for reg in regions:
        _, _, ev = _graph_data(reg)
        for q in qs:
            for bc in bcs:
                pr = exact_distribution(reg, bc, ModelParams(q)).probs
                for a, b in CATALOG:
                    d = pr[ev[a] & ev[b]].sum() - pr[ev[a]].sum() * pr[ev[b]].sum()
                    worst = min(worst, d)
                    cases += 1
    return CheckResult("FKG", bool(worst >= -TOL), cases, float(worst))


def mon_check(regions, qs=ORACLE_QS) -> CheckResult:
    """φ^wired[A] ≥ φ^free[A] for every catalog event."""
    worst, cases = np.inf, 0
    for reg in regions:
        _, _, ev = _graph_data(reg)
        for q in qs:
            pf = exact_distribution(reg, FREE, ModelParams(q)).probs
            pw = exact_distribution(reg, WIRED, ModelParams(q)).probs
            for name in EVENTS:
                worst = min(worst, pw[ev[name]].sum() - pf[ev[name]].sum())
                cases += 1
    return CheckResult("MON", bool(worst >= -TOL), cases, float(worst))


def smp_check(region: Region = None, window=None, qs=ORACLE_QS, bc=FREE) -> CheckResult:
    """Conditioning on the edges outside ``window`` gives the window law with induced wiring.

    ``window`` is a list of edges of ``region`` (default: the four edges of
    the unit face with lower-left corner at the origin).
    """
    region = region or box(1)
    window = window or [((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (1, 1)), ((0, 1), (1, 1))]
    win = subgraph(window)
    # window edge order of ``win`` as indices into ``region``
    wc = win.edge_coords
    widx = np.array([region.edge_index((a, b), (x, y)) for a, b, x, y in wc])
    out_idx = np.array([i for i in range(region.n_edges) if i not in set(widx)])
    n, eu, ev, *_ = graph_arrays(region, bc)
    bits = bits_matrix(region.n_edges)
    verts = region.vertices
    wverts = {tuple(v) for v in win.vertices}
    worst, cases = 0.0, 0
    for q in qs:
        params = ModelParams(q)
        pr = exact_distribution(region, bc, params).probs
        for xi in range(1 << len(out_idx)):
            xb = (xi >> np.arange(len(out_idx))) & 1
            sel = np.all(bits[:, out_idx] == xb, axis=1)
            cond = pr[sel]
            cond = cond / cond.sum()
            # window codes of the selected configurations
            wcodes = (bits[sel][:, widx] << np.arange(len(widx))).sum(axis=1)
            # induced wiring: window vertices joined through open outside edges (and bc)
            state = np.zeros(region.n_edges, dtype=np.uint8)
            state[out_idx] = xb
            lab, _ = _graph.component_labels(n, eu, ev, state)
            ids, _ = bc.contraction(region)
            classes = {}
            for vi, v in enumerate(verts):
                if tuple(v) in wverts:
                    classes.setdefault(lab[ids[vi]], []).append(tuple(int(t) for t in v))
            ind = BoundaryCondition.from_classes(classes.values())
            ref = exact_distribution(win, ind, params).probs
            got = np.zeros_like(ref)
            np.add.at(got, wcodes, cond)
            worst = max(worst, float(np.abs(got - ref).max()))
            cases += 1
    return CheckResult("SMP", worst <= TOL, cases, worst)


def heatbath_check(regions, qs=ORACLE_QS, bcs=(FREE, WIRED), max_edges: int = 10) -> CheckResult:
    """Heat-bath opening probabilities equal exact conditionals on graphs with ≤ max_edges edges."""
    worst, cases = 0.0, 0
    for reg in regions:
        m = reg.n_edges
        if m > max_edges:
            continue
        codes = np.arange(1 << m)
        for bc in bcs:
            n, eu, ev, *_ = graph_arrays(reg, bc)
            labels = all_labels(n, eu, ev)
            for q in qs:
                params = ModelParams(q)
                pr = exact_distribution(reg, bc, params).probs
                for e in range(m):
                    base = codes[(codes >> e) & 1 == 0]
                    up = base | (1 << e)
                    exact = pr[up] / (pr[up] + pr[base])
                    conn = labels[base, eu[e]] == labels[base, ev[e]]
                    hb = np.where(conn, heatbath_edge_prob(True, params),
                                  heatbath_edge_prob(False, params))
                    worst = max(worst, float(np.abs(exact - hb).max()))
                    cases += len(base)
    return CheckResult("heat-bath conditionals", worst <= TOL, cases, worst)


def run_oracle(qs=ORACLE_QS) -> OracleSummary:
    """All exact checks on the connected subgraphs of Λ_1."""
    regions = connected_subgraphs(box(1))
    return OracleSummary([
        fkg_check(regions, qs),
        mon_check(regions, qs),
        smp_check(box(1), qs=qs),
        heatbath_check(regions, qs),
    ])

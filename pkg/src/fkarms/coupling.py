"""Increasing coupling of ω ~ φ[· | A0(r, R)] and ω′ ~ φ, and crossing statistics.

Both configurations live on the same region and are updated edge by edge
with a shared uniform U.  The upper chain ω′ is an ordinary heat-bath chain.
The lower chain ω is the heat-bath chain restricted to A0: an opening is
refused when it would close an open primal circuit around the origin inside
the annulus (vertices of norm r+1..R-1), which is exactly the way A0 can
fail.  Because connections in ω imply connections in ω′ when ω ≤ ω′, the
opening probability of ω never exceeds that of ω′, so ω ≤ ω′ is preserved.

Circuit detection uses winding numbers: each vertical edge (x, 0)-(x, 1) with
x ≥ 1 crosses the ray {y = 1/2, x > 0} and carries +1 when traversed upward.
A closed path surrounds the origin iff its total crossing count is nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from . import _graph
from .connectivity import arm_flags
from .errors import ParameterError
from .goodscales import classify_scale, series_and_count
from .interfaces import color_components
from .lattice import Region, box
from .rcmodel import (FREE, EdgeConfig, ModelParams, Schedule, equilibrium_stream,
                      graph_arrays)


# --- compiled update ------------------------------------------------------------------


@njit(cache=True)
def creates_circuit(u, w, skip, indptr, adj_v, adj_e, state, in_p, cross,
                    seen_a, seen_b, pot_a, pot_b, stamp, qa, qb, c_uw):
    """Would opening edge u-w (crossing count ``c_uw`` from u to w) close a surrounding circuit?

    Searches open edges among annulus vertices from both ends at once.  The
    configuration is assumed to have no surrounding circuit yet, so all
    u-w paths have the same winding and the first meeting decides.
    """
    seen_a[u] = stamp
    seen_b[w] = stamp
    pot_a[u] = 0
    pot_b[w] = 0
    qa[0] = u
    qb[0] = w
    ha, ta, hb, tb = 0, 1, 0, 1
    while ha < ta and hb < tb:
        x = qa[ha]
        ha += 1
        for j in range(indptr[x], indptr[x + 1]):
            e = adj_e[j]
            if e == skip or not state[e]:
                continue
            y = adj_v[j]
            if not in_p[y]:
                continue
            # crossing count when moving x -> y along e
            c = cross[e] if x < y else -cross[e]
            if seen_b[y] == stamp:
                return pot_a[x] + c - pot_b[y] - c_uw != 0
            if seen_a[y] != stamp:
                seen_a[y] = stamp
                pot_a[y] = pot_a[x] + c
                qa[ta] = y
                ta += 1
        x = qb[hb]
        hb += 1
        for j in range(indptr[x], indptr[x + 1]):
            e = adj_e[j]
            if e == skip or not state[e]:
                continue
            y = adj_v[j]
            if not in_p[y]:
                continue
            c = cross[e] if x < y else -cross[e]
            if seen_a[y] == stamp:
                # path u..y, then y -> x, then x..w
                return pot_a[y] - c - pot_b[x] - c_uw != 0
            if seen_b[y] != stamp:
                seen_b[y] = stamp
                pot_b[y] = pot_b[x] + c
                qb[tb] = y
                tb += 1
    return False


@njit(cache=True)
def coupled_kernel(eu, ev, indptr, adj_v, adj_e, in_p, cross, lower, upper, p, q,
                   order, uniforms, seen_a, seen_b, pot_a, pot_b, qa, qb, stamp):
    """Apply the coupled single-edge update to the edges of ``order`` in turn."""
    p_free = p / (p + q * (1.0 - p))
    for t in range(len(order)):
        e = order[t]
        u = eu[e]
        w = ev[e]
        U = uniforms[t]
        if q == 1.0:
            pu = p
            pl = p
        else:
            stamp += 1
            cu = _graph.connected_excluding(u, w, e, indptr, adj_v, adj_e, upper,
                                            seen_a, seen_b, stamp, qa, qb)
            stamp += 1
            cl = _graph.connected_excluding(u, w, e, indptr, adj_v, adj_e, lower,
                                            seen_a, seen_b, stamp, qa, qb)
            pu = p if cu else p_free
            pl = p if cl else p_free
        upper[e] = 1 if U < pu else 0
        if U >= pl:
            lower[e] = 0
        elif lower[e] == 0:
            ok = True
            if in_p[u] and in_p[w]:
                stamp += 1
                c_uw = cross[e] if u < w else -cross[e]
                ok = not creates_circuit(u, w, e, indptr, adj_v, adj_e, lower, in_p, cross,
                                         seen_a, seen_b, pot_a, pot_b, stamp, qa, qb, c_uw)
            lower[e] = 1 if ok else 0
    return stamp


# --- geometry of the constraint ------------------------------------------------------


@dataclass(frozen=True)
class _Workspace:
    n: int
    eu: np.ndarray
    ev: np.ndarray
    indptr: np.ndarray
    adj_v: np.ndarray
    adj_e: np.ndarray
    in_p: np.ndarray
    cross: np.ndarray
    annulus_edges: np.ndarray
    outside_edges: np.ndarray


@lru_cache(maxsize=16)
def _workspace(region: Region, r: int, R: int) -> _Workspace:
    n, eu, ev, indptr, adj_v, adj_e = graph_arrays(region, FREE)
    v = region.vertices
    norm = np.abs(v).max(axis=1)
    in_p = ((norm >= r + 1) & (norm <= R - 1)).astype(np.uint8)
    c = region.edge_coords
    cross = ((c[:, 0] == c[:, 2]) & (c[:, 0] >= 1) & (c[:, 1] == 0) & (c[:, 3] == 1)).astype(np.int64)
    ann = (in_p[eu] == 1) & (in_p[ev] == 1)
    return _Workspace(n, eu, ev, indptr, adj_v, adj_e, in_p, cross,
                      np.nonzero(ann)[0].astype(np.int64), np.nonzero(~ann)[0].astype(np.int64))


def _scratch(n):
    return (np.zeros(n, np.int64), np.zeros(n, np.int64), np.zeros(n, np.int64),
            np.zeros(n, np.int64), np.empty(n, np.int64), np.empty(n, np.int64))


def has_dual_arm(config: EdgeConfig, r: int, R: int) -> bool:
    """A0(r, R) on a configuration."""
    return bool(arm_flags(config.to_pixels(R), r, R)[0])


def has_primal_arm(config: EdgeConfig, r: int, R: int) -> bool:
    return bool(arm_flags(config.to_pixels(R), r, R)[1])


# --- state and steps -----------------------------------------------------------------------


@dataclass
class CouplingState:
    """Pair (ω, ω′) with ω ≤ ω′ and ω ∈ A0(r, R), plus the sweep cursor.

    ``r`` and ``R`` are the radii of the conditioning annulus (2^m and 2^n for
    the dyadic construction).
    """

    lower: EdgeConfig
    upper: EdgeConfig
    r: int
    R: int
    params: ModelParams
    cursor: int = 0
    stamp: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.lower.region != self.upper.region:
            raise ParameterError("coupled configurations must share a region")
        if not (1 <= self.r < self.R):
            raise ParameterError(f"need 1 <= r < R, got ({self.r}, {self.R})")
        self._ws = _workspace(self.lower.region, self.r, self.R)
        self._scr = _scratch(self._ws.n)

    @classmethod
    def extremal(cls, region: Region, r: int, R: int, params: ModelParams) -> "CouplingState":
        """ω all closed, ω′ all open."""
        return cls(EdgeConfig.closed(region), EdgeConfig.opened(region), r, R, params)

    @property
    def region(self) -> Region:
        return self.lower.region

    def dominated(self) -> bool:
        return bool(np.all(self.lower.bits <= self.upper.bits))

    def check(self) -> None:
        """Raise AssertionError if an invariant is broken."""
        if not self.dominated():
            raise AssertionError("coupled pair is not ordered")
        if not has_dual_arm(self.lower, self.r, self.R):
            raise AssertionError("lower configuration left the conditioning event")

    def _run(self, order, uniforms):
        ws = self._ws
        sa, sb, pa, pb, qa, qb = self._scr
        self.stamp = int(coupled_kernel(ws.eu, ws.ev, ws.indptr, ws.adj_v, ws.adj_e, ws.in_p,
                                        ws.cross, self.lower.bits, self.upper.bits,
                                        self.params.p, self.params.q, order, uniforms,
                                        sa, sb, pa, pb, qa, qb, self.stamp))


def coupled_step(state: CouplingState, rng: np.random.Generator, steps: int = 1) -> CouplingState:
    """Update ``steps`` edges in lexicographic order from the cursor (in place)."""
    E = state.region.n_edges
    order = (state.cursor + np.arange(steps, dtype=np.int64)) % E
    state._run(order, rng.random(steps))
    state.cursor = int((state.cursor + steps) % E)
    return state


def coupled_sweep(state: CouplingState, rng: np.random.Generator,
                  edges: np.ndarray | None = None) -> CouplingState:
    """One pass over ``edges`` (default all edges) in lexicographic order."""
    order = np.arange(state.region.n_edges, dtype=np.int64) if edges is None else edges
    state._run(order, rng.random(len(order)))
    return state


# --- pair samplers -------------------------------------------------------------------------


def _conditioned_iid(region, params, r, R, rng, max_tries=100000):
    for _ in range(max_tries):
        cfg = EdgeConfig(region, (rng.random(region.n_edges) < params.p).astype(np.uint8))
        if has_dual_arm(cfg, r, R):
            return cfg
    raise ParameterError("rejection sampling for A0 did not accept")


def pair_stream(m: int, n: int, params: ModelParams, schedule: Schedule | None,
                rng: np.random.Generator, region: Region | None = None, dyadic: bool = True,
                sweeps: int = 0):
    """Endless generator of coupled pairs (ω, ω′).

    ``m, n`` are scale indices (radii 2^m, 2^n) unless ``dyadic`` is false, in
    which case they are the radii themselves.  The default region is
    Λ_{2R} with free boundary (Λ_R at q = 1, where the law inside Λ_R is the
    same).

    q = 1: ω₀ is drawn exactly from the conditioned law by rejection; one
    coupled sweep of the annulus edges with fresh uniforms then gives ω′ as an
    exact product sample and ω as an exact conditioned sample, with ω ≤ ω′
    (edges outside the annulus are set equal in both).

    q ≠ 1: ω′₀ comes from an equilibrium cluster-dynamics stream.  If it
    already lies in A0 the pair starts at (ω′₀, ω′₀); otherwise ω₀ is drawn by
    rejection from an independent stream and the pair starts at
    (ω₀ ∧ ω′₀, ω′₀).  Then ``sweeps`` coupled heat-bath sweeps are applied
    to every pair.  ω′ is exactly stationary; ω is exact except on the event
    ω′₀ ∉ A0, where it relaxes towards the conditioned law from below.
    """
    schedule = schedule or Schedule()
    r, R = (2 ** m, 2 ** n) if dyadic else (m, n)
    if not (1 <= r < R):
        raise ParameterError(f"need 1 <= r < R, got ({r}, {R})")
    if region is None:
        # a product measure restricted to Λ_R does not see the rest of Λ_{2R}
        region = box(R) if params.q == 1.0 else box(2 * R)
    ws = _workspace(region, r, R)
    p = params.p
    if params.q == 1.0:
        while True:
            lo = _conditioned_iid(region, params, r, R, rng)
            U = rng.random(region.n_edges)
            up = EdgeConfig(region, (U < p).astype(np.uint8))
            lo.bits[ws.outside_edges] = up.bits[ws.outside_edges]
            st = CouplingState(lo, up, r, R, params)
            st._run(ws.annulus_edges, U[ws.annulus_edges])
            yield st.lower, st.upper
    upper_stream = equilibrium_stream(region, FREE, params, schedule, rng)
    lower_stream = None
    while True:
        up = next(upper_stream).copy()
        if has_dual_arm(up, r, R):
            lo = up.copy()
        else:
            if lower_stream is None:
                lower_stream = equilibrium_stream(region, FREE, params, schedule, rng)
            while True:
                lo = next(lower_stream)
                if has_dual_arm(lo, r, R):
                    break
            lo = EdgeConfig(region, lo.bits & up.bits)
        st = CouplingState(lo, up, r, R, params)
        for _ in range(sweeps):
            coupled_sweep(st, rng)
        yield st.lower, st.upper


def sample_coupled_pair(m: int, n: int, params: ModelParams, schedule: Schedule | None,
                        rng: np.random.Generator, region: Region | None = None,
                        sweeps: int = 0):
    """One coupled pair for the dyadic annulus (2^m, 2^n); see ``pair_stream``."""
    return next(pair_stream(m, n, params, schedule, rng, region, sweeps=sweeps))


# --- crossing statistics ---------------------------------------------------------------------


def primally_crossed(img: np.ndarray, fd) -> bool:
    """Are the two primal petals of a four-petal domain joined inside it?"""
    m = fd.domain.shape[0]
    o0, o1 = fd.offset
    sub = np.ascontiguousarray(img[o0:o0 + m, o1:o1 + m])
    prim = [p for p in fd.petals if p.parity == 1]
    allowed = fd.domain.copy()
    for p in prim:
        allowed |= p.mask
    lab, _ = color_components(sub, allowed.astype(np.uint8))
    sets = [set(np.unique(lab[p.mask & (sub == 1)])) - {0} for p in prim]
    return bool(sets[0] & sets[1])


@dataclass(frozen=True)
class PetalCrossingRecord:
    """Crossing indicators of flower domain i at good scale k: X in ω, Y in ω′."""

    k: int
    side: int
    lower: int
    upper: int


@dataclass
class PairRecord:
    """Audit line for one coupled pair."""

    index: int
    K: int
    a1_lower: bool
    a1_upper: bool
    crossings: tuple = ()

    def to_row(self) -> dict:
        return {"index": self.index, "K": self.K, "a1_lower": int(self.a1_lower),
                "a1_upper": int(self.a1_upper)}


def analyse_pair(lower: EdgeConfig, upper: EdgeConfig, m: int, n: int, index: int = 0) -> PairRecord:
    """Good scales in series of ω, arm indicators of both, crossing indicators."""
    window = 2 ** n
    img_lo = lower.to_pixels(window)
    img_up = upper.to_pixels(window)
    a1_lo = bool(arm_flags(img_lo, 2 ** m, 2 ** n)[1])
    a1_up = bool(arm_flags(img_up, 2 ** m, 2 ** n)[1])
    certs = {k: classify_scale(img_lo, k) for k in range(m, n)}
    rec = series_and_count(img_lo, m, n, certs)
    crossings = []
    for k in rec.scales:
        for i, fd in enumerate(certs[k].domains, start=1):
            crossings.append(PetalCrossingRecord(k, i, int(primally_crossed(img_lo, fd)),
                                                 int(primally_crossed(img_up, fd))))
    return PairRecord(index, rec.count, a1_lo, a1_up, tuple(crossings))


@dataclass
class Stratum:
    K: int
    n: int
    hits_lower: int
    hits_upper: int

    @property
    def ratio(self) -> float | None:
        if self.n == 0 or self.hits_upper == 0:
            return None
        return self.hits_lower / self.hits_upper

    def ratio_ci(self, z: float = 1.96):
        """Delta-method CI for the ratio of the two (paired) proportions."""
        if self.ratio is None:
            return None
        pl, pu = self.hits_lower / self.n, self.hits_upper / self.n
        # ω ∈ A1 implies ω′ ∈ A1, so the covariance of the indicators is pl (1 - pu)
        var = (pl * (1 - pl) / pu ** 2 + pl ** 2 * pu * (1 - pu) / pu ** 4
               - 2 * pl * pl * (1 - pu) / pu ** 3) / self.n
        se = math.sqrt(max(var, 0.0))
        return self.ratio - z * se, self.ratio + z * se


@dataclass
class CouplingReport:
    strata: list
    discordant: int
    total: int
    crossing_pairs: dict
    constraint_ok: bool

    def stratum(self, K: int):
        for s in self.strata:
            if s.K == K:
                return s
        return None

    def decreasing(self, Ks=(0, 1, 2)) -> bool | None:
        """Whether the stratified ratio strictly decreases over ``Ks`` (None if a stratum is empty)."""
        vals = []
        for K in Ks:
            s = self.stratum(K)
            if s is None or s.ratio is None:
                return None
            vals.append(s.ratio)
        return all(a > b for a, b in zip(vals, vals[1:]))


def coupled_statistics(samples) -> CouplingReport:
    """Stratify pair records by the number K of good scales in series.

    Stratum K collects the pairs with ω ∈ D(K), i.e. at least K scales.
    Empty strata are reported with n = 0 and ratio ``None``.
    """
    samples = list(samples)
    maxK = max((s.K for s in samples), default=0)
    strata = []
    for K in range(0, max(2, maxK) + 1):
        sel = [s for s in samples if s.K >= K]
        strata.append(Stratum(K, len(sel), sum(s.a1_lower for s in sel),
                              sum(s.a1_upper for s in sel)))
    pairs = {(a, b): 0 for a in (0, 1) for b in (0, 1)}
    ok = True
    for s in samples:
        by_scale = {}
        for c in s.crossings:
            by_scale.setdefault(c.k, {})[c.side] = c
        for k, d in by_scale.items():
            if 1 in d and 2 in d:
                pairs[(d[1].upper, d[2].upper)] += 1
                if d[1].lower + d[2].lower > 1:
                    ok = False
    disc = sum(1 for s in samples if s.a1_upper and not s.a1_lower)
    return CouplingReport(strata, disc, len(samples), pairs, ok)

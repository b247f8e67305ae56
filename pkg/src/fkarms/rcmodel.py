"""Random-cluster measure: parameters, boundary conditions, exact oracle and samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _graph
from .errors import ConvergenceError, ParameterError, ResourceError
from .lattice import Region

MAX_EXACT_EDGES = 20


def critical_point(q: float) -> float:
    """Self-dual point sqrt(q) / (1 + sqrt(q))."""
    if not q > 0:
        raise ParameterError(f"cluster weight must be positive, got {q!r}")
    s = math.sqrt(q)
    return s / (1.0 + s)


@dataclass(frozen=True)
class ModelParams:
    """Cluster weight ``q`` in [1, 4] and edge weight ``p`` (critical by default)."""

    q: float
    p: float | None = None

    def __post_init__(self):
        if not (1.0 <= self.q <= 4.0):
            raise ParameterError(f"q must lie in [1, 4], got {self.q!r}")
        if self.p is None:
            object.__setattr__(self, "p", critical_point(self.q))
        if not (0.0 < self.p < 1.0):
            raise ParameterError(f"p must lie in (0, 1), got {self.p!r}")

    @property
    def p_free(self) -> float:
        """Probability to open an edge whose endpoints are not otherwise connected."""
        return self.p / (self.p + self.q * (1.0 - self.p))


@dataclass(frozen=True)
class BoundaryCondition:
    """Partition of boundary vertices into wired classes.

    ``mode`` is ``free``, ``wired`` (all of the region's boundary in one class)
    or ``custom`` with explicit ``classes`` given as tuples of lattice points.
    Vertices not listed in a custom class are singletons.
    """

    mode: str = "free"
    classes: tuple = ()

    @staticmethod
    def from_classes(classes) -> "BoundaryCondition":
        norm = tuple(sorted(tuple(sorted(tuple(int(t) for t in v) for v in c))
                            for c in classes if len(c) > 1))
        seen = set()
        for c in norm:
            for v in c:
                if v in seen:
                    raise ParameterError(f"vertex {v} appears in two wired classes")
                seen.add(v)
        return BoundaryCondition("custom", norm)

    def contraction(self, region: Region) -> tuple[np.ndarray, int]:
        """Map each vertex to a contracted vertex id; returns ``(ids, count)``."""
        n = region.n_vertices
        rep = np.arange(n)
        if self.mode == "wired":
            b = region.boundary
            if len(b):
                rep[b] = b.min()
        elif self.mode == "custom":
            for c in self.classes:
                idx = region.index_array(np.array(c))
                if np.any(idx < 0):
                    raise ParameterError(f"wired class {c} leaves the region")
                rep[idx] = idx.min()
        elif self.mode != "free":
            raise ParameterError(f"unknown boundary mode {self.mode!r}")
        uniq, ids = np.unique(rep, return_inverse=True)
        return ids.astype(np.int64), len(uniq)


FREE = BoundaryCondition("free")
WIRED = BoundaryCondition("wired")


@dataclass
class EdgeConfig:
    """0/1 state per edge of ``region`` (1 = open), in the region's edge order."""

    region: Region
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (self.region.n_edges,):
            raise ParameterError(
                f"config has {self.bits.shape} bits, region has {self.region.n_edges} edges")

    @classmethod
    def closed(cls, region: Region) -> "EdgeConfig":
        return cls(region, np.zeros(region.n_edges, dtype=np.uint8))

    @classmethod
    def opened(cls, region: Region) -> "EdgeConfig":
        return cls(region, np.ones(region.n_edges, dtype=np.uint8))

    @classmethod
    def from_code(cls, region: Region, code: int) -> "EdgeConfig":
        bits = (code >> np.arange(region.n_edges)) & 1
        return cls(region, bits.astype(np.uint8))

    @property
    def code(self) -> int:
        return int(sum(int(b) << i for i, b in enumerate(self.bits)))

    @property
    def n_open(self) -> int:
        return int(self.bits.sum())

    def copy(self) -> "EdgeConfig":
        return EdgeConfig(self.region, self.bits.copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, EdgeConfig) and self.region == other.region
                and np.array_equal(self.bits, other.bits))

    def __le__(self, other: "EdgeConfig") -> bool:
        return bool(np.all(self.bits <= other.bits))

    @property
    def dual_bits(self) -> np.ndarray:
        """State of the dual edge crossing each primal edge (same order)."""
        return (1 - self.bits).astype(np.uint8)

    def state(self, u, w) -> int:
        return int(self.bits[self.region.edge_index(u, w)])

    def to_pixels(self, window: int | None = None) -> np.ndarray:
        """Doubled-grid image of ``Λ_window``.

        Primal vertex pixels are 1, dual vertex pixels 0 and edge pixels carry
        the edge state; edges absent from the region count as closed.
        """
        if window is None:
            window = self.region.extent
        size = 4 * window + 1
        img = np.zeros((size, size), dtype=np.uint8)
        img[0::2, 0::2] = 1
        img[1::2, 1::2] = 0
        px, py = self.region.edge_pixels(window)
        ok = (px >= 0) & (py >= 0) & (px < size) & (py < size)
        img[px[ok], py[ok]] = self.bits[ok]
        return img


def config_from_pixels(region: Region, img: np.ndarray) -> EdgeConfig:
    """Read edge states of ``region`` off a doubled-grid image."""
    window = (img.shape[0] - 1) // 4
    px, py = region.edge_pixels(window)
    return EdgeConfig(region, img[px, py])


@lru_cache(maxsize=64)
def graph_arrays(region: Region, bc: BoundaryCondition):
    """Contracted edge arrays and CSR adjacency for ``region`` under ``bc``."""
    ids, n = bc.contraction(region)
    e = region.edges
    eu = ids[e[:, 0]] if len(e) else np.zeros(0, dtype=np.int64)
    ev = ids[e[:, 1]] if len(e) else np.zeros(0, dtype=np.int64)
    indptr, adj_v, adj_e = _graph.build_csr(n, eu, ev)
    return n, eu, ev, indptr, adj_v, adj_e


def n_components(config: EdgeConfig, bc: BoundaryCondition) -> int:
    """k(ω^ξ): components after contracting each wired class."""
    n, eu, ev, *_ = graph_arrays(config.region, bc)
    return int(_graph.component_labels(n, eu, ev, config.bits)[1])


def log_weight(config: EdgeConfig, bc: BoundaryCondition, params: ModelParams) -> float:
    """Unnormalized log weight |ω| log(p/(1-p)) + k(ω^ξ) log q."""
    k = n_components(config, bc)
    return config.n_open * math.log(params.p / (1.0 - params.p)) + k * math.log(params.q)


@dataclass
class ExactTable:
    """Exact law over all 2^|E| configurations; configuration ``c`` has bit i = edge i."""

    region: Region
    bc: BoundaryCondition
    params: ModelParams
    probs: np.ndarray
    log_z: float
    opened: np.ndarray
    comps: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.region.n_edges

    def bits_matrix(self) -> np.ndarray:
        codes = np.arange(len(self.probs))
        return ((codes[:, None] >> np.arange(self.n_edges)[None, :]) & 1).astype(np.uint8)

    def entries(self):
        for code, pr in enumerate(self.probs):
            yield EdgeConfig.from_code(self.region, code), float(pr)

    def indicator(self, event) -> np.ndarray:
        """Boolean vector of ``event(config)`` over all configurations."""
        return np.array([bool(event(c)) for c, _ in self.entries()])

    def prob(self, mask) -> float:
        return float(self.probs[np.asarray(mask, dtype=bool)].sum())

    def edge_marginals(self) -> np.ndarray:
        return self.probs @ self.bits_matrix()


def exact_distribution(region: Region, bc: BoundaryCondition, params: ModelParams) -> ExactTable:
    """Brute-force normalized random-cluster law on a small region."""
    if region.n_edges > MAX_EXACT_EDGES:
        raise ResourceError(
            f"exact enumeration limited to {MAX_EXACT_EDGES} edges, region has {region.n_edges}")
    n, eu, ev, *_ = graph_arrays(region, bc)
    opened, comps = _graph.count_all_configs(n, eu, ev)
    logw = opened * math.log(params.p / (1.0 - params.p)) + comps * math.log(params.q)
    shift = logw.max()
    w = np.exp(logw - shift)
    z = w.sum()
    return ExactTable(region, bc, params, w / z, float(shift + math.log(z)), opened, comps)


def heatbath_edge_prob(connected_off_e: bool, params: ModelParams) -> float:
    """Conditional probability that an edge is open given the rest."""
    return params.p if connected_off_e else params.p_free


def endpoints_connected(config: EdgeConfig, bc: BoundaryCondition, e: int) -> bool:
    """Whether the endpoints of edge ``e`` are connected in (ω minus e)^ξ."""
    n, eu, ev, indptr, adj_v, adj_e = graph_arrays(config.region, bc)
    seen_a = np.zeros(n, dtype=np.int64)
    seen_b = np.zeros(n, dtype=np.int64)
    qa = np.empty(n, dtype=np.int64)
    qb = np.empty(n, dtype=np.int64)
    return bool(_graph.connected_excluding(eu[e], ev[e], e, indptr, adj_v, adj_e,
                                           config.bits, seen_a, seen_b, 1, qa, qb))


class Chain:
    """A single Markov chain on a region; ``state`` is updated in place."""

    def __init__(self, region: Region, bc: BoundaryCondition, params: ModelParams,
                 sampler: str = "cluster", state: np.ndarray | None = None):
        if sampler not in ("heatbath", "cluster"):
            raise ParameterError(f"unknown sampler {sampler!r}")
        self.region, self.bc, self.params, self.sampler = region, bc, params, sampler
        self.n, self.eu, self.ev, self.indptr, self.adj_v, self.adj_e = graph_arrays(region, bc)
        m = region.n_edges
        self.state = np.zeros(m, dtype=np.uint8) if state is None else np.array(state, dtype=np.uint8)

    def step(self, rng: np.random.Generator):
        m = len(self.eu)
        p, q = self.params.p, self.params.q
        if q == 1.0:
            self.state[:] = rng.random(m) < p
        elif self.sampler == "heatbath":
            _graph.heatbath_sweep_kernel(self.eu, self.ev, self.indptr, self.adj_v, self.adj_e,
                                         self.state, p, q, rng.random(m))
        else:
            _graph.cluster_step_kernel(self.n, self.eu, self.ev, self.state, p, q,
                                       rng.random(self.n), rng.random(m))

    def config(self) -> EdgeConfig:
        return EdgeConfig(self.region, self.state.copy())


def trajectory_codes(region: Region, bc: BoundaryCondition, params: ModelParams,
                     sampler: str, n_samples: int, thin: int, seed: int,
                     burnin: int = 100) -> np.ndarray:
    """Configuration codes of ``n_samples`` states of one chain, ``thin`` steps apart.

    Intended for validating samplers against ``exact_distribution`` on small graphs.
    """
    if sampler not in ("heatbath", "cluster"):
        raise ParameterError(f"unknown sampler {sampler!r}")
    if region.n_edges > 62:
        raise ResourceError("configuration codes need at most 62 edges")
    n, eu, ev, indptr, adj_v, adj_e = graph_arrays(region, bc)
    state = np.zeros(region.n_edges, dtype=np.uint8)
    cluster = sampler == "cluster"
    _graph.trajectory_kernel(n, eu, ev, indptr, adj_v, adj_e, state, params.p, params.q,
                             cluster, 1, burnin, seed)
    return _graph.trajectory_kernel(n, eu, ev, indptr, adj_v, adj_e, state, params.p,
                                    params.q, cluster, n_samples, thin, seed + 1)


def heatbath_sweep(config: EdgeConfig, bc: BoundaryCondition, params: ModelParams,
                   rng: np.random.Generator) -> EdgeConfig:
    """One lexicographic heat-bath pass; returns a new configuration."""
    ch = Chain(config.region, bc, params, "heatbath", config.bits)
    n, eu, ev, indptr, adj_v, adj_e = graph_arrays(config.region, bc)
    _graph.heatbath_sweep_kernel(eu, ev, indptr, adj_v, adj_e, ch.state, params.p, params.q,
                                 rng.random(len(eu)))
    return ch.config()


def cluster_step(config: EdgeConfig, bc: BoundaryCondition, params: ModelParams,
                 rng: np.random.Generator) -> EdgeConfig:
    """One Chayes-Machta cluster update; returns a new configuration."""
    ch = Chain(config.region, bc, params, "cluster", config.bits)
    ch.step(rng)
    return ch.config()


@dataclass(frozen=True)
class Schedule:
    """Sampler choice and run lengths.

    ``burnin=None`` selects the adaptive sandwich diagnostic; ``thin`` steps
    separate successive samples of a stream.
    """

    sampler: str = "cluster"
    burnin: int | None = None
    thin: int = 1
    max_steps: int = 20000
    block: int = 20


def _lr_crossing(region: Region, bc: BoundaryCondition):
    n, eu, ev, *_ = graph_arrays(region, bc)
    ids, _ = bc.contraction(region)
    x = region.vertices[:, 0]
    left, right = ids[x == x.min()], ids[x == x.max()]

    def crossed(state):
        lab, _k = _graph.component_labels(n, eu, ev, state)
        return float(bool(np.intersect1d(lab[left], lab[right]).size))
    return crossed


def _batch_stats(series: np.ndarray, batches: int = 5):
    s = np.asarray(series, dtype=float)
    usable = len(s) - len(s) % batches
    means = s[len(s) - usable:].reshape(batches, -1).mean(axis=1)
    return means.mean(), means.std(ddof=1) / math.sqrt(batches)


def adaptive_burnin(region: Region, bc: BoundaryCondition, params: ModelParams,
                    schedule: Schedule, rng: np.random.Generator) -> tuple[Chain, dict]:
    """Run 2 all-open and 2 all-closed replicas until their observables agree.

    Observables are the left-right crossing indicator and the edge density,
    averaged over the second half of the history.  Returns the first replica
    and the diagnostic statistics.
    """
    m = region.n_edges
    chains = [Chain(region, bc, params, schedule.sampler,
                    np.full(m, 1 if i < 2 else 0, dtype=np.uint8)) for i in range(4)]
    crossed = _lr_crossing(region, bc)
    hist = [[] for _ in range(4)]
    steps = 0
    stats = {}
    while steps < schedule.max_steps:
        for _ in range(schedule.block):
            for i, ch in enumerate(chains):
                ch.step(rng)
                hist[i].append((crossed(ch.state), ch.state.mean()))
            steps += 1
        if steps < 2 * schedule.block:
            continue
        ok = True
        for obs in (0, 1):
            half = [np.array([h[obs] for h in hist[i][steps // 2:]]) for i in range(4)]
            mo, so = _batch_stats(np.concatenate(half[:2]))
            mc, sc = _batch_stats(np.concatenate(half[2:]))
            pooled = math.sqrt(so ** 2 + sc ** 2)
            stats[("crossing", "density")[obs]] = (mo, mc, pooled)
            if abs(mo - mc) > 2.0 * pooled + 1e-12:
                ok = False
        if ok:
            stats["steps"] = steps
            return chains[0], stats
    stats["steps"] = steps
    raise ConvergenceError(f"no agreement between sandwich replicas after {steps} steps", stats)


def start_chain(region: Region, bc: BoundaryCondition, params: ModelParams,
                schedule: Schedule, rng: np.random.Generator) -> Chain:
    """A chain already past burn-in."""
    if params.q == 1.0:
        ch = Chain(region, bc, params, schedule.sampler)
        ch.step(rng)
        return ch
    if schedule.burnin is None:
        return adaptive_burnin(region, bc, params, schedule, rng)[0]
    ch = Chain(region, bc, params, schedule.sampler)
    for _ in range(schedule.burnin):
        ch.step(rng)
    return ch


def equilibrium_stream(region: Region, bc: BoundaryCondition, params: ModelParams,
                       schedule: Schedule, rng: np.random.Generator):
    """Endless generator of (approximately) equilibrium configurations."""
    ch = start_chain(region, bc, params, schedule, rng)
    yield ch.config()
    while True:
        for _ in range(max(1, schedule.thin)):
            ch.step(rng)
        yield ch.config()


def sample_equilibrium(region: Region, bc: BoundaryCondition, params: ModelParams,
                       schedule: Schedule, rng: np.random.Generator) -> EdgeConfig:
    return start_chain(region, bc, params, schedule, rng).config()


@dataclass
class ConditionedSampler:
    """Stream of samples of the measure conditioned on a decreasing event."""

    region: Region
    bc: BoundaryCondition
    params: ModelParams
    event: object
    schedule: Schedule = field(default_factory=Schedule)
    method: str | None = None
    pilot: int = 100
    acceptance: float | None = None

    def samples(self, rng: np.random.Generator):
        if not self.event(EdgeConfig.closed(self.region)):
            raise ParameterError("conditioning event fails on the all-closed configuration")
        stream = equilibrium_stream(self.region, self.bc, self.params, self.schedule, rng)
        if self.method is None:
            hits = sum(bool(self.event(next(stream))) for _ in range(self.pilot))
            self.acceptance = hits / self.pilot
            self.method = "rejection" if self.acceptance >= 0.05 else "constrained"
        if self.method == "rejection":
            while True:
                c = next(stream)
                if self.event(c):
                    yield c
        else:
            yield from self._constrained(rng)

    def _constrained(self, rng):
        region, params = self.region, self.params
        n, eu, ev, indptr, adj_v, adj_e = graph_arrays(region, self.bc)
        cfg = EdgeConfig.closed(region)
        seen_a = np.zeros(n, dtype=np.int64)
        seen_b = np.zeros(n, dtype=np.int64)
        qa = np.empty(n, dtype=np.int64)
        qb = np.empty(n, dtype=np.int64)
        stamp = 0

        def sweep():
            nonlocal stamp
            u = rng.random(region.n_edges)
            for e in range(region.n_edges):
                stamp += 1
                conn = _graph.connected_excluding(eu[e], ev[e], e, indptr, adj_v, adj_e,
                                                  cfg.bits, seen_a, seen_b, stamp, qa, qb)
                want = u[e] < heatbath_edge_prob(conn, params)
                if want and not cfg.bits[e]:
                    cfg.bits[e] = 1
                    if not self.event(cfg):
                        cfg.bits[e] = 0
                elif not want:
                    cfg.bits[e] = 0

        burn = self.schedule.burnin if self.schedule.burnin is not None else 200
        for _ in range(burn):
            sweep()
        while True:
            yield cfg.copy()
            for _ in range(max(1, self.schedule.thin)):
                sweep()


def sample_conditioned(region: Region, bc: BoundaryCondition, params: ModelParams,
                       decreasing_event, rng: np.random.Generator,
                       schedule: Schedule | None = None, method: str | None = None) -> EdgeConfig:
    """One sample of φ[· | event] for a decreasing event."""
    cs = ConditionedSampler(region, bc, params, decreasing_event, schedule or Schedule(), method)
    return next(cs.samples(rng))

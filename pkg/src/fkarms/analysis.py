"""Predicted exponents, Monte Carlo estimates, exponent fits and arm-inequality reports.

Arm probabilities decay like (r/R)^α.  Estimates are collected per replica
(independent RNG streams) so that errors of fitted quantities can be obtained
by jackknife over replicas, which accounts for the correlation between scales
that share samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .connectivity import arm_radii, bernoulli_arm_radii
from .errors import ParameterError
from .lattice import box
from .rcmodel import FREE, ModelParams, Schedule, equilibrium_stream

Z95 = 1.959963984540054


# --- predictions --------------------------------------------------------------------------


def kappa_of(q: float) -> float:
    """κ = 4π / arccos(-√q / 2)."""
    if not (0.0 < q <= 4.0):
        raise ParameterError(f"q must lie in (0, 4], got {q!r}")
    return 4.0 * math.pi / math.acos(-math.sqrt(q) / 2.0)


@dataclass(frozen=True)
class Prediction:
    q: float
    kappa: float
    alpha0: float
    alpha1: float
    alpha01: float

    @property
    def gap(self) -> float:
        return self.alpha01 - self.alpha0 - self.alpha1


def predicted_exponents(q: float) -> Prediction:
    k = kappa_of(q)
    a1 = (8.0 - k) * (3.0 * k - 8.0) / (32.0 * k)
    a01 = (16.0 - (4.0 - k) ** 2) / (8.0 * k)
    return Prediction(q, k, a1, a1, a01)


# --- estimates ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int
    ci: tuple

    def to_record(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n,
                "ci_lo": self.ci[0], "ci_hi": self.ci[1]}


def wilson(hits: int, n: int, z: float = Z95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ParameterError("no samples")
    ph = hits / n
    den = 1.0 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if hits <= 0 else max(0.0, mid - half)
    hi = 1.0 if hits >= n else min(1.0, mid + half)
    return lo, hi


def proportion(hits: int, n: int, z: float = Z95) -> Estimate:
    """Binomial proportion with Wilson CI."""
    ph = hits / n if n > 0 else float("nan")
    ci = wilson(hits, n, z)
    return Estimate(ph, math.sqrt(ph * (1 - ph) / n), n, ci)


def estimate_probability(event, sampler, n: int, rng: np.random.Generator,
                         batches: int = 20) -> Estimate:
    """Fraction of ``n`` samples satisfying ``event``.

    ``sampler`` is an iterator of configurations or a callable taking ``rng``.
    The standard error is the larger of the binomial and batch-means values;
    the Wilson interval uses the matching effective sample size.
    """
    if n < 1:
        raise ParameterError("need n >= 1")
    draw = (lambda: next(sampler)) if hasattr(sampler, "__next__") else (lambda: sampler(rng))
    x = np.fromiter((bool(event(draw())) for _ in range(n)), dtype=np.float64, count=n)
    ph = float(x.mean())
    se = math.sqrt(ph * (1 - ph) / n)
    b = min(batches, n)
    if b >= 2:
        means = np.array([c.mean() for c in np.array_split(x, b)])
        se = max(se, float(means.std(ddof=1) / math.sqrt(b)))
    n_eff = n if se == 0 else max(1.0, min(n, ph * (1 - ph) / se ** 2))
    ci = wilson(ph * n_eff, n_eff) if n_eff != n else wilson(int(x.sum()), n)
    return Estimate(ph, se, n, ci)


# --- fitting --------------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Exponent α in p ≈ A (r/R)^α [1 + b (r/R)^ω]; ``correction`` is ω or None."""

    alpha: Estimate
    coef: tuple
    correction: float | None


def _design(ratios, correction):
    x = np.log(np.asarray(ratios, dtype=float))
    cols = [np.ones_like(x), x]
    if correction is not None:
        cols.append(np.asarray(ratios, dtype=float) ** correction)
    return np.stack(cols, axis=1)


def _wls(ratios, hits, ns, correction):
    hits = np.asarray(hits, dtype=float)
    ns = np.asarray(ns, dtype=float)
    if np.any(hits <= 0):
        raise ParameterError("cannot fit a scale with zero hits")
    ph = hits / ns
    # variance of log p̂, with a continuity floor so that p̂ = 1 keeps a finite weight
    pt = (hits + 0.5) / (ns + 1.0)
    var = np.maximum((1 - pt) / (ns * pt), 1.0 / (ns * ns))
    X = _design(ratios, correction)
    W = 1.0 / var
    XtW = X.T * W
    A = XtW @ X
    coef = np.linalg.solve(A, XtW @ np.log(ph))
    cov = np.linalg.inv(A)
    return coef, cov


def _check_design(ratios, correction):
    distinct = len(set(float(r) for r in ratios))
    need = 3 if correction is None else 4
    if len(ratios) < 3 or distinct < need:
        raise ParameterError(f"degenerate design: need >= {need} distinct ratios, got {distinct}")


def saturated(hits, ns, min_misses: int) -> np.ndarray:
    """Points with fewer than ``min_misses`` failures (p̂ indistinguishable from 1)."""
    return np.asarray(ns, dtype=float) - np.asarray(hits, dtype=float) < min_misses


def fit_exponent(points, replicas=None, correction: float | None = None,
                 min_misses: int = 0) -> FitResult:
    """Weighted least-squares slope of log p against log(r/R).

    ``points`` is a list of (r/R, Estimate) or (r/R, hits, n).  ``replicas``
    optionally gives per-replica (hits, n) lists aligned with ``points``; the
    standard error is then the jackknife over replicas, otherwise the WLS
    covariance.  ``correction`` adds a term b (r/R)^ω to log p.  Points with
    fewer than ``min_misses`` failures carry no slope information and are
    left out.
    """
    hits, ns = [], []
    for pt in points:
        if isinstance(pt[1], Estimate):
            hits.append(pt[1].value * pt[1].n)
            ns.append(pt[1].n)
        else:
            hits.append(pt[1])
            ns.append(pt[2])
    keep = ~saturated(hits, ns, min_misses)
    ratios = [pt[0] for pt, k in zip(points, keep) if k]
    hits = np.asarray(hits, dtype=float)[keep]
    ns = np.asarray(ns, dtype=float)[keep]
    _check_design(ratios, correction)
    coef, cov = _wls(ratios, hits, ns, correction)
    alpha = float(coef[1])
    if replicas is not None and len(replicas) >= 2:
        reps = np.asarray(replicas, dtype=float)[:, keep]  # (G, points, 2)
        tot = reps.sum(axis=0)
        jk = np.array([_wls(ratios, (tot - g)[:, 0], (tot - g)[:, 1], correction)[0][1]
                       for g in reps])
        G = len(reps)
        se = float(math.sqrt((G - 1) / G * np.sum((jk - jk.mean()) ** 2)))
    else:
        se = float(math.sqrt(max(cov[1, 1], 0.0)))
    n = int(ns.sum())
    return FitResult(Estimate(alpha, se, n, (alpha - Z95 * se, alpha + Z95 * se)),
                     tuple(float(c) for c in coef), correction)


# --- arm tables -----------------------------------------------------------------------------


ARMS = ("0", "1", "01")


@dataclass
class ArmTable:
    """Per-replica hit counts of A0, A1, A01(r, R) for each R.

    ``hits[event]`` has shape (replicas, len(Rs)); ``n[g]`` is the sample count
    of replica g.
    """

    q: float
    r: int
    Rs: tuple
    hits: dict
    n: np.ndarray
    seeds: tuple
    bc: str = "free"

    def total(self, event: str, j: int) -> tuple:
        return int(self.hits[event][:, j].sum()), int(self.n.sum())

    def estimate(self, event: str, j: int) -> Estimate:
        return proportion(*self.total(event, j))

    def replicas(self, event: str) -> np.ndarray:
        """(replicas, len(Rs), 2) array of (hits, n)."""
        h = self.hits[event]
        return np.stack([h, np.broadcast_to(self.n[:, None], h.shape)], axis=2)

    def merge(self, other: "ArmTable") -> "ArmTable":
        if (self.q, self.r, self.Rs) != (other.q, other.r, other.Rs):
            raise ParameterError("cannot merge tables of different designs")
        return ArmTable(self.q, self.r, self.Rs,
                        {e: np.vstack([self.hits[e], other.hits[e]]) for e in ARMS},
                        np.concatenate([self.n, other.n]), self.seeds + other.seeds, self.bc)


def _tally(radii, Rs):
    a1 = np.stack([radii[:, 0] >= 2 * R for R in Rs], axis=1)
    a0 = np.stack([radii[:, 1] >= 2 * R - 1 for R in Rs], axis=1)
    return {"0": a0.sum(axis=0), "1": a1.sum(axis=0), "01": (a0 & a1).sum(axis=0)}


def chain_arm_radii(q: float, r: int, R: int, n: int, rng: np.random.Generator,
                    bc=FREE, schedule: Schedule | None = None, volume: int = 4) -> np.ndarray:
    """Arm reach radii of ``n`` equilibrium samples on Λ_{volume·R}."""
    params = ModelParams(q)
    stream = equilibrium_stream(box(volume * R), bc, params, schedule or Schedule(), rng)
    out = np.empty((n, 2), dtype=np.int64)
    for s in range(n):
        out[s] = arm_radii(next(stream).to_pixels(R), r)
    return out


def arm_table(q: float, r: int, Rs, n: int, seed: int, replicas: int = 10, bc=FREE,
              schedule: Schedule | None = None) -> ArmTable:
    """Arm hit counts with ``n`` samples in total split over ``replicas`` streams.

    q = 1 uses lazily generated Bernoulli percolation (exact, no boundary);
    other q use cluster dynamics on Λ_{4 max R} with the given boundary.
    """
    Rs = tuple(int(R) for R in Rs)
    if any(R <= r for R in Rs):
        raise ParameterError("every R must exceed r")
    Rmax = max(Rs)
    children = np.random.SeedSequence(seed).spawn(replicas)
    sizes = [len(c) for c in np.array_split(np.arange(n), replicas)]
    hits = {e: np.zeros((replicas, len(Rs)), dtype=np.int64) for e in ARMS}
    for g, (ss, m) in enumerate(zip(children, sizes)):
        if m == 0:
            continue
        if q == 1.0:
            radii = bernoulli_arm_radii(r, Rmax, ModelParams(1.0).p, m,
                                        int(ss.generate_state(1)[0] % (2 ** 31)))
        else:
            radii = chain_arm_radii(q, r, Rmax, m, np.random.default_rng(ss), bc, schedule)
        for e, v in _tally(radii, Rs).items():
            hits[e][g] = v
    return ArmTable(q, r, Rs, hits, np.array(sizes, dtype=np.int64),
                    tuple((seed, g) for g in range(replicas)), bc.mode)


# --- inequality report ----------------------------------------------------------------------


def _jackknife(fn, table: ArmTable):
    """Jackknife standard error of fn(totals) over replicas; fn gets {event: (hits, n) arrays}."""
    G = len(table.n)
    tot = {e: table.hits[e].sum(axis=0) for e in ARMS}
    N = table.n.sum()
    full = fn({e: tot[e] / N for e in ARMS})
    if G < 2:
        return full, float("nan")
    vals = []
    for g in range(G):
        Ng = N - table.n[g]
        vals.append(fn({e: (tot[e] - table.hits[e][g]) / Ng for e in ARMS}))
    vals = np.asarray(vals)
    return full, float(math.sqrt((G - 1) / G * np.sum((vals - vals.mean()) ** 2)))


@dataclass
class InequalityReport:
    q: float
    r: int
    Rs: tuple
    estimates: dict
    product_gap: list
    fits: dict
    gap: Estimate
    slope: Estimate
    prediction: Prediction
    correction: float | None
    seeds: tuple
    bracket: dict = field(default_factory=dict)
    fitted_Rs: tuple = ()

    def eq1_holds(self, z: float = 2.0) -> list:
        """φ̂[A01] ≤ φ̂[A0]·φ̂[A1] at each R, up to z combined standard errors."""
        return [d.value <= z * d.stderr for d in self.product_gap]

    def to_json(self) -> str:
        rec = {
            "q": self.q, "r": self.r, "Rs": list(self.Rs), "seeds": list(self.seeds),
            "correction": self.correction,
            "estimates": {e: [x.to_record() for x in v] for e, v in self.estimates.items()},
            "product_gap": [x.to_record() for x in self.product_gap],
            "alpha": {e: f.alpha.to_record() for e, f in self.fits.items()},
            "gap": self.gap.to_record(), "slope": self.slope.to_record(),
            "prediction": {"kappa": self.prediction.kappa, "alpha0": self.prediction.alpha0,
                           "alpha1": self.prediction.alpha1, "alpha01": self.prediction.alpha01,
                           "gap": self.prediction.gap},
            "bracket": self.bracket, "fitted_Rs": list(self.fitted_Rs),
        }
        return json.dumps(rec, indent=2)


def _fit_from_freqs(ratios, freqs, ns, correction):
    hits = np.maximum(freqs * ns, 1e-9)
    return _wls(ratios, hits, ns, correction)[0][1]


def inequality_report(q: float, r: int, Rs, n: int, seed: int, replicas: int = 10,
                      correction: float | None = None, table: ArmTable | None = None,
                      wired: ArmTable | None = None, min_misses: int = 10) -> InequalityReport:
    """Arm estimates, the product inequality, exponent fits and the gap.

    ``gap`` is α̂01 - α̂0 - α̂1 and ``slope`` the fitted exponent ĉ of the
    ratio φ̂[A01] / (φ̂[A0] φ̂[A1]); both use the same design (with the optional
    correction exponent) and jackknife errors.  A WIRED table, if given, is
    reported as a bracket: the half-differences of the gap and slope between
    the two boundary conditions are added in quadrature to their errors.
    Scales where any arm event has fewer than ``min_misses`` failures are
    left out of all fits; the correction term is dropped when fewer than four
    scales remain, and with fewer than three the fits are empty and the gap
    and slope are NaN (the product inequality is still reported).
    """
    table = table or arm_table(q, r, Rs, n, seed, replicas)
    Rs = table.Rs
    ratios = [r / R for R in Rs]
    N = float(table.n.sum())
    est = {e: [table.estimate(e, j) for j in range(len(Rs))] for e in ARMS}
    pgap = []
    for j in range(len(Rs)):
        val, se = _jackknife(lambda f: f["01"][j] - f["0"][j] * f["1"][j], table)
        pgap.append(Estimate(float(val), se, int(N), (val - Z95 * se, val + Z95 * se)))
    keep = np.ones(len(Rs), dtype=bool)
    for e in ARMS:
        keep &= ~saturated(table.hits[e].sum(axis=0), np.full(len(Rs), N), min_misses)
    idx = np.nonzero(keep)[0]
    if correction is not None and len(idx) < 4:
        # too few informative scales to fit the correction term as well
        correction = None
    if len(idx) < 3:
        nan = Estimate(math.nan, math.nan, int(N), (math.nan, math.nan))
        return InequalityReport(q, r, Rs, est, pgap, {}, nan, nan, predicted_exponents(q),
                                None, table.seeds, {}, tuple(Rs[j] for j in idx))
    fits = {e: fit_exponent([(ratios[j], *table.total(e, j)) for j in idx],
                            table.replicas(e)[:, idx], correction) for e in ARMS}
    used = [ratios[j] for j in idx]
    ns = np.full(len(idx), N)

    def gap_fn(f):
        a = {e: _fit_from_freqs(used, f[e][idx], ns, correction) for e in ARMS}
        return a["01"] - a["0"] - a["1"]

    def slope_fn(f):
        # ratio of frequencies treated as a pseudo-probability with the A01 weights
        ratio = f["01"][idx] / (f["0"][idx] * f["1"][idx])
        X = _design(used, correction)
        coef = np.linalg.lstsq(X, np.log(ratio), rcond=None)[0]
        return coef[1]

    g, gse = _jackknife(gap_fn, table)
    c, cse = _jackknife(slope_fn, table)
    bracket = {}
    if wired is not None:
        if wired.Rs != Rs:
            raise ParameterError("wired table must use the same scales")
        for e in ARMS:
            bracket[e] = [abs(wired.estimate(e, j).value - est[e][j].value) / 2
                          for j in range(len(Rs))]
        gw, _ = _jackknife(gap_fn, wired)
        cw, _ = _jackknife(slope_fn, wired)
        bracket["gap"] = abs(gw - g) / 2
        bracket["slope"] = abs(cw - c) / 2
        gse = math.hypot(gse, bracket["gap"])
        cse = math.hypot(cse, bracket["slope"])
    return InequalityReport(
        q, r, Rs, est, pgap, fits,
        Estimate(float(g), gse, int(N), (g - Z95 * gse, g + Z95 * gse)),
        Estimate(float(c), cse, int(N), (c - Z95 * cse, c + Z95 * cse)),
        predicted_exponents(q), correction, table.seeds, bracket,
        tuple(Rs[j] for j in idx))


def quasi_multiplicativity(table: ArmTable, event: str = "1") -> list:
    """φ̂(r, R_{j+1})² / (φ̂(r, R_j) φ̂(r, R_{j+2})) for consecutive scale triples.

    For a geometric schedule and a pure power law the value is 1;
    quasi-multiplicativity keeps it inside a scale-independent band.
    """
    p = [table.estimate(event, j).value for j in range(len(table.Rs))]
    return [p[j + 1] ** 2 / (p[j] * p[j + 2]) for j in range(len(p) - 2) if p[j] * p[j + 2] > 0]

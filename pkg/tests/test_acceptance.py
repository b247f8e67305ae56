"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed as each test finishes and again in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import chisquare

from fkarms.analysis import (arm_table, inequality_report, predicted_exponents, proportion,
                             wilson)
from fkarms.connectivity import arm_flags
from fkarms.coupling import analyse_pair, coupled_statistics, has_dual_arm, pair_stream
from fkarms.goodscales import good_scale_count
from fkarms.harness import ExperimentConfig, run
from fkarms.interfaces import find_double_four_petal, flower_domain_from_image
from fkarms.lattice import box, subgraph
from fkarms.oracle import run_oracle
from fkarms.rcmodel import (FREE, WIRED, EdgeConfig, ModelParams, Schedule, equilibrium_stream,
                            exact_distribution, trajectory_codes)

CYCLE = subgraph([((0, 0), (1, 0)), ((1, 0), (1, 1)), ((0, 1), (1, 1)), ((0, 0), (0, 1))])
ARM_RS = (8, 16, 32, 64, 128)


@pytest.fixture(scope="module")
def q1_report():
    table = arm_table(1.0, 4, ARM_RS, 10 ** 5, seed=2024, replicas=10)
    return inequality_report(1.0, 4, ARM_RS, 10 ** 5, 2024, 10, correction=1.0, table=table)


def test_exact_oracles(verdict):
    t = time.time()
    summary = run_oracle()
    elapsed = time.time() - t
    ok = summary.passed and elapsed < 60
    verdict(1, ok, f"{'; '.join(summary.lines())}; {elapsed:.1f}s")
    assert ok


def test_self_dual_crossing(verdict):
    t = time.time()
    rec = run(ExperimentConfig(task="sample", q=1.0, R=32, samples=10 ** 5, seed=5))
    elapsed = time.time() - t
    row = rec.tallies[0]
    phat, n = row["phat"], row["n"]
    sigma = math.sqrt(0.25 / n)
    ok = abs(phat - 0.5) <= 3 * sigma and elapsed < 60
    verdict(2, ok, f"P(LR crossing of 33x32) = {phat:.4f}, |dev| = {abs(phat - 0.5) / sigma:.2f} sigma, "
                   f"n = {n}, {elapsed:.1f}s")
    assert ok


def test_sampler_chi_square(verdict):
    t = time.time()
    n = 10 ** 6
    worst = (1.0, None)
    for q in (1.0, 1.5, 2.0, 4.0):
        par = ModelParams(q)
        for bc in (FREE, WIRED):
            exact = exact_distribution(CYCLE, bc, par).probs
            for sampler, thin in (("heatbath", 1), ("cluster", math.ceil(5 * q))):
                codes = trajectory_codes(CYCLE, bc, par, sampler, n, thin, seed=31)
                pv = chisquare(np.bincount(codes, minlength=16), exact * n).pvalue
                if pv < worst[0]:
                    worst = (pv, (q, bc.mode, sampler))
    elapsed = time.time() - t
    ok = worst[0] > 1e-3 and elapsed < 300
    verdict(3, ok, f"smallest p-value {worst[0]:.3g} at {worst[1]}, n = {n}, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_exponents_q1(verdict, q1_report):
    rep = q1_report
    pred = predicted_exponents(1.0)
    a0, a1, a01 = (rep.fits[e].alpha for e in ("0", "1", "01"))
    d1 = abs(a1.value - pred.alpha1)
    d01 = abs(a01.value - pred.alpha01)
    comb = math.hypot(a0.stderr, a1.stderr)
    ok = d1 <= 0.05 and d01 <= 0.06 and abs(a0.value - a1.value) <= 2 * comb
    verdict(4, ok, f"alpha0 = {a0.value:.4f}({a0.stderr:.4f}), alpha1 = {a1.value:.4f}"
                   f"({a1.stderr:.4f}) vs {pred.alpha1:.4f}, alpha01 = {a01.value:.4f}"
                   f"({a01.stderr:.4f}) vs {pred.alpha01:.4f}, fitted R = {rep.fitted_Rs}")
    assert ok


@pytest.mark.slow
def test_strict_gap_q1(verdict, q1_report):
    g, c = q1_report.gap, q1_report.slope
    ok = (g.value > 0 and g.ci[0] > 0 and 0.01 <= g.value <= 0.09
          and c.value > 0 and c.ci[0] > 0)
    verdict(5, ok, f"gap = {g.value:.4f} CI ({g.ci[0]:.4f}, {g.ci[1]:.4f}); slope = {c.value:.4f} "
                   f"CI ({c.ci[0]:.4f}, {c.ci[1]:.4f}); CLE value {predicted_exponents(1.0).gap:.4f}")
    assert ok


@pytest.mark.slow
def test_product_inequality(verdict, q1_report):
    rep2 = inequality_report(2.0, 2, (8, 16, 32), 10 ** 4, seed=77, replicas=10)
    parts = []
    ok = True
    for rep in (q1_report, rep2):
        for R, d in zip(rep.Rs, rep.product_gap):
            z = d.value / d.stderr if d.stderr > 0 else (0.0 if d.value <= 0 else math.inf)
            ok &= d.value <= 2 * d.stderr
            parts.append(f"q={rep.q:g},r={rep.r},R={R}: z={z:+.1f}")
    verdict(6, ok, "A01 - A0*A1 in stderr units: " + ", ".join(parts))
    assert ok


def _coupled_records(q, n_pairs, seed):
    rng = np.random.default_rng(seed)
    gen = pair_stream(4, 7, ModelParams(q), Schedule(), rng)
    records = []
    for i in range(n_pairs):
        lo, up = next(gen)
        # hard invariants, checked on every pair
        assert np.all(lo.bits <= up.bits), f"pair {i} is not ordered"
        assert has_dual_arm(lo, 16, 128), f"pair {i} left A0"
        records.append(analyse_pair(lo, up, 4, 7, i))
    return coupled_statistics(records)


@pytest.mark.slow
def test_coupling_invariants(verdict):
    parts, ok = [], True
    for q, seed in ((1.0, 101), (2.0, 202)):
        rep = _coupled_records(q, 10 ** 4, seed)
        n = rep.total
        s0 = rep.stratum(0)
        hl, hu = s0.hits_lower, s0.hits_upper
        lo_ci, up_ci = wilson(hl, n), wilson(hu, n)
        # ω ≤ ω′ makes P[ω′∈A1] - P[ω∈A1] the discordant fraction, so the paired
        # interval for the difference is the Wilson interval of the discordant count
        disc_ci = wilson(rep.discordant, n)
        separated = hl < hu and disc_ci[0] > 0
        dec = rep.decreasing((0, 1, 2))
        ratios = [(s.K, s.n, None if s.ratio is None else round(s.ratio, 4)) for s in rep.strata[:3]]
        ok &= separated and dec is True and rep.constraint_ok
        parts.append(f"q={q:g}: lower {hl / n:.4f} CI ({lo_ci[0]:.4f}, {lo_ci[1]:.4f}) < upper "
                     f"{hu / n:.4f} CI ({up_ci[0]:.4f}, {up_ci[1]:.4f}), difference "
                     f"{rep.discordant / n:.4f} CI ({disc_ci[0]:.4f}, {disc_ci[1]:.4f}); "
                     f"strata (K, n, ratio) {ratios}, decreasing={dec}")
    verdict(7, ok, "invariants held on every pair; " + " | ".join(parts))
    assert ok


@pytest.mark.slow
def test_good_scale_density(verdict):
    # common random numbers: one Bernoulli configuration on Λ_512 serves all three n,
    # and the accepted draws for each n are an exact rejection sample of A01(16, 2^n)
    rng = np.random.default_rng(808)
    reg = box(2 ** 9)
    p = ModelParams(1.0).p
    ns = (7, 8, 9)
    acc = {n: 0 for n in ns}
    total = {n: 0 for n in ns}
    atleast1 = {n: 0 for n in ns}
    draws = 1000
    for _ in range(draws):
        img = EdgeConfig(reg, (rng.random(reg.n_edges) < p).astype(np.uint8)).to_pixels(2 ** 9)
        for n in ns:
            a0, a1 = arm_flags(img, 16, 2 ** n)
            if not (a0 and a1):
                continue
            acc[n] += 1
            _, rec = good_scale_count(img, 4, n)
            total[n] += rec.count
            atleast1[n] += int(rec.count >= 1)
    means = [total[n] / max(acc[n], 1) for n in ns]
    freq = {n: proportion(atleast1[n], acc[n]) for n in ns}
    delta = freq[9].ci[0]
    ok = all(m > 0 for m in means) and all(a <= b for a, b in zip(means, means[1:])) and delta > 0
    detail = ", ".join(f"n={n}: accepted {acc[n]}, mean count {m:.4f}, P(>=1) = {freq[n].value:.4f} "
                       f"CI ({freq[n].ci[0]:.4f}, {freq[n].ci[1]:.4f})" for n, m in zip(ns, means))
    verdict(8, ok, f"{detail}; delta-hat = {delta:.4f}")
    assert ok


def _resample_inside(img, fd, rng):
    mask = fd.global_mask(img.shape, fd.domain)
    I, J = np.indices(img.shape)
    edge_px = ((I + J) % 2 == 1) & mask
    out = img.copy()
    out[edge_px] = rng.integers(0, 2, int(edge_px.sum()))
    return out


def test_flower_measurability(verdict):
    rng = np.random.default_rng(909)
    reg = box(40)
    configs = [EdgeConfig(reg, (rng.random(reg.n_edges) < 0.5).astype(np.uint8))
               for _ in range(500)]
    stream = equilibrium_stream(reg, FREE, ModelParams(2.0), Schedule(), rng)
    configs += [next(stream).copy() for _ in range(500)]
    same = parity = 0
    for c in configs:
        img = c.to_pixels(40)
        fd = flower_domain_from_image(img, 4, 16, "inner")
        again = flower_domain_from_image(_resample_inside(img, fd, rng), 4, 16, "inner")
        same += int(again.signature() == fd.signature())
        par = fd.petal_parities()
        k = len(par)
        parity += int(k == 1 or (k % 2 == 0 and all(par[i] != par[(i + 1) % k] for i in range(k))))
    n = len(configs)
    ok = same == n and parity == n
    verdict(9, ok, f"{same}/{n} domains unchanged by inside resampling, {parity}/{n} petal lists "
                   f"with 1 or an even number of alternating petals")
    assert ok


@pytest.mark.slow
def test_double_four_petal_frequency(verdict):
    draws = 1000
    parts, ok = [], True
    for q in (1.0, 2.0):
        freqs = []
        for R in (16, 32, 64):
            Rout = (3 * R) // 2
            rng = np.random.default_rng(int(1000 * q) + R)
            stream = equilibrium_stream(box(2 * Rout), FREE, ModelParams(q), Schedule(), rng)
            hits = sum(find_double_four_petal(next(stream), R, Rout) is not None
                       for _ in range(draws))
            freqs.append(proportion(hits, draws))
        # no trend to zero: the largest-size interval reaches the smallest-size one
        flat = freqs[-1].ci[1] >= freqs[0].ci[0]
        ok &= all(f.value >= 0.01 for f in freqs) and flat
        parts.append(f"q={q:g}: " + ", ".join(
            f"R={R}: {f.value:.4f} CI ({f.ci[0]:.4f}, {f.ci[1]:.4f})"
            for R, f in zip((16, 32, 64), freqs)))
    verdict(10, ok, f"double four-petal frequency between R and 1.5R, n = {draws}: " + " | ".join(parts))
    assert ok

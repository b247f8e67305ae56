import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from fkarms.connectivity import detect_arm, detect_crossing, ArmSpec
from fkarms.errors import ConvergenceError, ParameterError, ResourceError
from fkarms.lattice import box, rectangle, subgraph
from fkarms.rcmodel import (FREE, WIRED, BoundaryCondition, Chain, ConditionedSampler,
                            EdgeConfig, ModelParams, Schedule, cluster_step, critical_point,
                            endpoints_connected, exact_distribution, heatbath_edge_prob,
                            heatbath_sweep, log_weight, n_components, sample_conditioned,
                            sample_equilibrium, trajectory_codes)

EDGE = subgraph([((0, 0), (1, 0))])
CYCLE = subgraph([((0, 0), (1, 0)), ((1, 0), (1, 1)), ((0, 1), (1, 1)), ((0, 0), (0, 1))])
PATH2 = subgraph([((0, 0), (1, 0)), ((1, 0), (2, 0))])


def cluster_thin(q):
    """Steps between recorded cluster-chain states so that draws are nearly independent."""
    return int(math.ceil(5 * q))


@pytest.mark.parametrize("q,p", [(1, 0.5), (2, 0.5857864376269049), (4, 2 / 3)])
def test_critical_point_values(q, p):
    assert critical_point(q) == pytest.approx(p, abs=1e-15)


@pytest.mark.parametrize("q", [0, -1])
def test_critical_point_rejects(q):
    with pytest.raises(ParameterError):
        critical_point(q)


@pytest.mark.parametrize("q", [0.5, 4.5])
def test_model_params_range(q):
    with pytest.raises(ParameterError):
        ModelParams(q)


def test_single_edge_log_weights():
    par = ModelParams(2.0, 0.3)
    closed, opened = EdgeConfig.closed(EDGE), EdgeConfig.opened(EDGE)
    assert log_weight(closed, FREE, par) == pytest.approx(2 * math.log(2.0))
    assert log_weight(opened, FREE, par) == pytest.approx(math.log(0.3 / 0.7) + math.log(2.0))
    ratio = math.exp(log_weight(opened, WIRED, par) - log_weight(closed, WIRED, par))
    assert ratio == pytest.approx(0.3 / 0.7)


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 3.0, 4.0])
def test_single_edge_exact(q):
    par = ModelParams(q)
    p = par.p
    assert exact_distribution(EDGE, FREE, par).edge_marginals()[0] == pytest.approx(
        p / (p + q * (1 - p)), abs=1e-14)
    assert exact_distribution(EDGE, WIRED, par).edge_marginals()[0] == pytest.approx(p)


def test_single_edge_q2_value():
    m = exact_distribution(EDGE, FREE, ModelParams(2.0)).edge_marginals()[0]
    assert m == pytest.approx(1 / (1 + math.sqrt(2)), abs=1e-12)
    assert round(m, 6) == 0.414214


def test_q1_is_product_measure():
    par = ModelParams(1.0, 0.3)
    tab = exact_distribution(box(1), FREE, par)
    bits = tab.bits_matrix()
    k = bits.sum(axis=1)
    expect = 0.3 ** k * 0.7 ** (bits.shape[1] - k)
    assert np.allclose(tab.probs, expect, atol=1e-15)


def test_exact_too_many_edges():
    with pytest.raises(ResourceError):
        exact_distribution(box(3), FREE, ModelParams(2.0))


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 4.0])
def test_heatbath_prob_examples(q):
    par = ModelParams(q)
    assert heatbath_edge_prob(True, par) == pytest.approx(par.p)
    assert heatbath_edge_prob(False, par) == pytest.approx(1 / (1 + math.sqrt(q)))


@pytest.mark.parametrize("region", [PATH2, CYCLE])
@pytest.mark.parametrize("q", [1.5, 2.0, 4.0])
def test_heatbath_prob_matches_exact(region, q):
    par = ModelParams(q)
    tab = exact_distribution(region, FREE, par)
    for code in range(len(tab.probs)):
        for e in range(region.n_edges):
            if (code >> e) & 1:
                continue
            up = code | (1 << e)
            exact = tab.probs[up] / (tab.probs[up] + tab.probs[code])
            cfg = EdgeConfig.from_code(region, code)
            hb = heatbath_edge_prob(endpoints_connected(cfg, FREE, e), par)
            assert hb == pytest.approx(exact, abs=1e-12)


def test_custom_boundary_classes():
    bc = BoundaryCondition.from_classes([[(0, 0), (1, 1)]])
    assert n_components(EdgeConfig.closed(CYCLE), bc) == 3
    with pytest.raises(ParameterError):
        BoundaryCondition.from_classes([[(0, 0), (1, 0)], [(1, 0), (1, 1)]])


@given(st.integers(0, 15), st.integers(0, 3), st.floats(1.0, 4.0))
@settings(max_examples=60, deadline=None)
def test_detailed_balance(code, e, q):
    """Heat-bath flow between configurations differing at one edge balances the weights."""
    par = ModelParams(q)
    lo = EdgeConfig.from_code(CYCLE, code & ~(1 << e))
    hi = EdgeConfig.from_code(CYCLE, code | (1 << e))
    pe = heatbath_edge_prob(endpoints_connected(lo, FREE, e), par)
    flow_ratio = pe / (1 - pe)
    weight_ratio = math.exp(log_weight(hi, FREE, par) - log_weight(lo, FREE, par))
    assert flow_ratio == pytest.approx(weight_ratio, rel=1e-12)


def test_q1_one_sweep_is_product(rng):
    region = box(3)
    par = ModelParams(1.0, 0.3)
    dens = np.mean([heatbath_sweep(EdgeConfig.opened(region), FREE, par, rng).bits.mean()
                    for _ in range(400)])
    assert abs(dens - 0.3) < 4 * math.sqrt(0.21 / (400 * region.n_edges))


def test_q1_cluster_step_resamples_everything(rng):
    par = ModelParams(1.0, 0.5)
    cfg = EdgeConfig.opened(box(4))
    out = [cluster_step(cfg, FREE, par, rng).bits for _ in range(200)]
    assert abs(np.mean(out) - 0.5) < 0.02


@pytest.mark.parametrize("sampler", ["heatbath", "cluster"])
@pytest.mark.parametrize("bc", [FREE, WIRED])
@pytest.mark.parametrize("q", [1.5, 2.0, 4.0])
def test_sampler_law_on_cycle(sampler, bc, q):
    par = ModelParams(q)
    thin = cluster_thin(q) if sampler == "cluster" else 1
    n = 50000
    codes = trajectory_codes(CYCLE, bc, par, sampler, n, thin, seed=11)
    exact = exact_distribution(CYCLE, bc, par).probs
    assert chisquare(np.bincount(codes, minlength=16), exact * n).pvalue > 1e-3


def test_chain_rejects_unknown_sampler():
    with pytest.raises(ParameterError):
        Chain(CYCLE, FREE, ModelParams(2.0), "metropolis")


def test_sample_equilibrium_q1_fixed_burnin(rng):
    sched = Schedule(burnin=None)
    cfg = sample_equilibrium(box(4), FREE, ModelParams(1.0), sched, rng)
    assert cfg.region == box(4)


def test_adaptive_burnin_converges(rng):
    cfg = sample_equilibrium(box(6), FREE, ModelParams(2.0), Schedule(), rng)
    assert 0 < cfg.bits.mean() < 1


def test_adaptive_burnin_budget(rng):
    with pytest.raises(ConvergenceError):
        sample_equilibrium(box(6), FREE, ModelParams(2.0), Schedule(max_steps=5, block=5), rng)


def test_q2_density_matches_window_oracle(rng):
    """Edge density of Λ_16 sits between the free and wired exact laws of a small window."""
    par = ModelParams(2.0)
    region = box(16)
    sched = Schedule(burnin=200, thin=5)
    ch = Chain(region, FREE, par, "cluster")
    for _ in range(200):
        ch.step(rng)
    win = [region.edge_index((x, y), (x + 1, y)) for x in (-1, 0) for y in (-1, 0, 1)]
    vals = []
    for _ in range(1000):
        for _ in range(sched.thin):
            ch.step(rng)
        vals.append(ch.state[win].mean())
    lo = exact_distribution(box(1), FREE, par).edge_marginals().mean()
    hi = exact_distribution(box(1), WIRED, par).edge_marginals().mean()
    est, se = np.mean(vals), np.std(vals) / math.sqrt(len(vals))
    assert lo - 3 * se <= est <= hi + 3 * se


@pytest.mark.slow
def test_q2_crossing_samplers_agree(rng):
    par = ModelParams(2.0)
    region = box(32)
    rect = rectangle(64, 64, -32, -32)
    est = {}
    for sampler in ("heatbath", "cluster"):
        ch = Chain(region, FREE, par, sampler)
        for _ in range(100):
            ch.step(rng)
        hits = []
        for _ in range(600):
            for _ in range(2):
                ch.step(rng)
            hits.append(detect_crossing(ch.config(), rect))
        x = np.array(hits, dtype=float)
        means = x.reshape(20, -1).mean(axis=1)
        est[sampler] = (x.mean(), means.std(ddof=1) / math.sqrt(20))
    (a, sa), (b, sb) = est.values()
    assert abs(a - b) <= 2 * math.hypot(sa, sb)


def test_sample_conditioned_satisfies_event(rng):
    par = ModelParams(1.0)
    a0 = ArmSpec("0", 4, 64)
    cs = ConditionedSampler(box(64), FREE, par, lambda c: detect_arm(c, a0), Schedule())
    gen = cs.samples(rng)
    for _ in range(5):
        assert detect_arm(next(gen), a0)
    assert cs.method == "rejection"
    assert cs.acceptance >= 0.5


def test_sample_conditioned_rejects_impossible_event(rng):
    with pytest.raises(ParameterError):
        sample_conditioned(CYCLE, FREE, ModelParams(2.0), lambda c: c.n_open > 0, rng)


@pytest.mark.parametrize("method", ["rejection", "constrained"])
def test_sample_conditioned_tiny_graph(rng, method):
    par = ModelParams(2.0)
    event = lambda c: c.bits[0] == 0  # noqa: E731
    tab = exact_distribution(CYCLE, FREE, par)
    mask = tab.indicator(event)
    target = np.where(mask, tab.probs, 0.0)
    target /= target.sum()
    cs = ConditionedSampler(CYCLE, FREE, par, event, Schedule(burnin=50, thin=3), method)
    gen = cs.samples(rng)
    n = 6000
    codes = [next(gen).code for _ in range(n)]
    obs = np.bincount(codes, minlength=16)
    assert obs[~mask].sum() == 0
    assert chisquare(obs[mask], target[mask] * n).pvalue > 1e-3

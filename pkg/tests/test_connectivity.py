import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import pattern, random_config
from fkarms.connectivity import (ArmSpec, arm_flags, arm_radii, bernoulli_arm_radii,
                                 cluster_labels, detect_arm, detect_crossing,
                                 detect_dual_crossing)
from fkarms.errors import ParameterError
from fkarms.lattice import annulus, box, rectangle
from fkarms.rcmodel import FREE, WIRED, EdgeConfig, ModelParams, n_components


def test_cluster_counts_on_box2():
    reg = box(2)
    assert cluster_labels(EdgeConfig.opened(reg)).count == 1
    assert cluster_labels(EdgeConfig.closed(reg)).count == 25
    assert n_components(EdgeConfig.closed(reg), WIRED) == 10


def test_wired_labels_join_boundary():
    reg = box(2)
    lab = cluster_labels(EdgeConfig.closed(reg), bc=WIRED)
    b = reg.boundary
    assert len(set(lab.labels[b])) == 1
    assert lab.connected(b[0], b[-1])


def test_labels_on_wrong_region():
    with pytest.raises(ParameterError):
        cluster_labels(EdgeConfig.closed(box(2)), box(3))


@pytest.mark.parametrize("sigma,expect_open,expect_closed", [
    ("1", True, False), ("0", False, True), ("01", False, False)])
def test_arms_on_extremal_configs(sigma, expect_open, expect_closed):
    spec = ArmSpec(sigma, 2, 8)
    assert detect_arm(EdgeConfig.opened(box(8)), spec) is expect_open
    assert detect_arm(EdgeConfig.closed(box(8)), spec) is expect_closed


def test_half_plane_has_both_arms():
    cfg = pattern(box(8), lambda x, y: np.floor(x) >= 1)
    assert detect_arm(cfg, ArmSpec("01", 2, 8))


def test_arm_spec_validation():
    with pytest.raises(ParameterError):
        ArmSpec("2", 1, 4)
    with pytest.raises(ParameterError):
        ArmSpec("1", 4, 4)


def test_arm_requires_covering_region():
    with pytest.raises(ParameterError):
        detect_arm(EdgeConfig.opened(box(4)), ArmSpec("1", 2, 8))


def test_arm_on_annulus_region():
    cfg = EdgeConfig.opened(annulus(1, 8))
    assert detect_arm(cfg, ArmSpec("1", 2, 8))


def test_arm_radii_consistent_with_flags(rng):
    reg = box(16)
    for _ in range(30):
        img = random_config(reg, rng).to_pixels(16)
        rp, rd = arm_radii(img, 2)
        for R in range(3, 17):
            a0, a1 = arm_flags(img, 2, R)
            assert a1 == (rp >= 2 * R)
            assert a0 == (rd >= 2 * R - 1)


def test_open_cross_gives_primal_arm_only():
    cfg = pattern(box(8), lambda x, y: (np.abs(x) < 0.6) | (np.abs(y) < 0.6))
    a0, a1 = arm_flags(cfg.to_pixels(8), 2, 8)
    assert a1 and a0


def test_dual_circuit_blocks_primal_arm():
    # closing every edge from norm 4 to norm 5 leaves a dual circuit at radius 4.5
    cfg = pattern(box(8), lambda x, y: np.maximum(np.abs(x), np.abs(y)) != 4.5)
    a0, a1 = arm_flags(cfg.to_pixels(8), 2, 8)
    assert not a1 and not a0
    assert arm_flags(cfg.to_pixels(8), 5, 8)[1]


def test_crossing_all_open():
    assert detect_crossing(EdgeConfig.opened(box(4)), rectangle(3, 2))


def test_crossing_needs_rectangle():
    with pytest.raises(ParameterError):
        detect_crossing(EdgeConfig.opened(box(4)), box(2))


def test_duality_xor_exhaustive():
    rect = rectangle(2, 1)
    assert rect.n_edges == 7
    for code in range(1 << 7):
        cfg = EdgeConfig.from_code(rect, code)
        assert detect_crossing(cfg, rect) != detect_dual_crossing(cfg, rect)


@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40, deadline=None)
def test_duality_xor_random(n, seed):
    rect = rectangle(n + 1, n)
    cfg = random_config(rect, np.random.default_rng(seed))
    assert detect_crossing(cfg, rect) != detect_dual_crossing(cfg, rect)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0.2, 0.8))
@settings(max_examples=30, deadline=None)
def test_arm_monotonicity(seed, p):
    rng = np.random.default_rng(seed)
    reg = box(12)
    lo = random_config(reg, rng, p * 0.8)
    hi = EdgeConfig(reg, lo.bits | (rng.random(reg.n_edges) < 0.3))
    a0_lo, a1_lo = arm_flags(lo.to_pixels(12), 3, 12)
    a0_hi, a1_hi = arm_flags(hi.to_pixels(12), 3, 12)
    assert not a1_lo or a1_hi
    assert not a0_hi or a0_lo


def test_bernoulli_radii_match_full_search():
    """Lazily sampled arm reach has the same law as the search on full samples."""
    r, R, n = 2, 12, 4000
    lazy = bernoulli_arm_radii(r, R, 0.5, n, 3)
    rng = np.random.default_rng(4)
    reg = box(R)
    full = np.array([arm_flags(random_config(reg, rng).to_pixels(R), r, R) for _ in range(n)])
    lazy_a1 = (lazy[:, 0] >= 2 * R).mean()
    lazy_a0 = (lazy[:, 1] >= 2 * R - 1).mean()
    se = np.sqrt(0.25 / n) * np.sqrt(2)
    assert abs(lazy_a1 - full[:, 1].mean()) < 4 * se
    assert abs(lazy_a0 - full[:, 0].mean()) < 4 * se

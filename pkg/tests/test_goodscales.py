import numpy as np
import pytest

from conftest import edge_midpoints, figure_scale, random_config
from fkarms.connectivity import arm_flags
from fkarms.errors import ParameterError, ScaleTooSmallError
from fkarms.goodscales import (CLUSTERS, LINKS, classify_scale, good_scale_count,
                               series_and_count)
from fkarms.lattice import box
from fkarms.rcmodel import EdgeConfig


def embed(cfg, region):
    """Copy ``cfg`` onto a larger region, other edges closed."""
    out = np.zeros(region.n_edges, dtype=np.uint8)
    idx = [region.edge_index((a, b), (c, d)) for a, b, c, d in cfg.region.edge_coords]
    out[idx] = cfg.bits
    return EdgeConfig(region, out)


def two_good_scales(dual_bridge=True):
    """Scales 4 and 5 both good on Λ_64, optionally joined by a dual bridge.

    Each scale carries the hand-built good pattern.  Its outer primal cluster
    already meets the inner primal cluster of scale 5 on the east axis; a
    closed patch on the west axis near radius 32 does the same for the dual
    clusters.
    """
    reg = box(64)
    x, y = edge_midpoints(reg)
    rho = np.maximum(np.abs(x), np.abs(y))
    bits = np.zeros(reg.n_edges, dtype=bool)
    for k in (4, 5):
        full = embed(figure_scale(k), reg).bits.astype(bool)
        sel = (rho >= 16) & (rho <= 32) if k == 4 else rho > 32
        bits = np.where(sel, full, bits)
    near = (np.abs(y) <= 3) & (np.abs(x) >= 29) & (np.abs(x) <= 36)
    if dual_bridge:
        bits = np.where(near & (x < 0), False, bits)
    return EdgeConfig(reg, bits.astype(np.uint8))


def test_link_table_covers_clusters():
    assert set(LINKS) == set(CLUSTERS)
    assert {v[2] for v in LINKS.values()} == {0, 1}


@pytest.mark.parametrize("k", [4, 5, 6])
def test_hand_built_scale_is_good(k):
    cert = classify_scale(figure_scale(k), k)
    assert cert is not None
    s = cert.summary()
    assert s["k"] == k
    for i in (1, 2):
        assert [p["parity"] for p in s["petals"][i - 1]] == [1, 0, 1, 0]
    assert set(s["witness_lengths"]) == set(CLUSTERS)


@pytest.mark.parametrize("k", [4, 5, 6])
def test_deleting_dual_link_breaks_goodness(k):
    assert classify_scale(figure_scale(k, drop="in_dual"), k) is None


def test_all_open_not_good():
    assert classify_scale(EdgeConfig.opened(box(32)), 4) is None
    assert classify_scale(EdgeConfig.closed(box(32)), 4) is None


def test_scale_too_small():
    with pytest.raises(ScaleTooSmallError):
        classify_scale(EdgeConfig.opened(box(32)), 3)


def test_window_too_small():
    with pytest.raises(ParameterError):
        classify_scale(EdgeConfig.opened(box(16)), 4)


def test_image_and_config_agree():
    cfg = figure_scale(4)
    a = classify_scale(cfg, 4)
    b = classify_scale(cfg.to_pixels(), 4)
    assert a.summary() == b.summary()


def test_verdict_depends_only_on_scale_annulus(rng):
    base = embed(figure_scale(4), box(48))
    x, y = edge_midpoints(base.region)
    rho = np.maximum(np.abs(x), np.abs(y))
    outside = (rho < 16) | (rho > 32)
    for _ in range(5):
        noise = random_config(base.region, rng).bits
        cfg = EdgeConfig(base.region, np.where(outside, noise, base.bits))
        assert classify_scale(cfg, 4) is not None
        bad = embed(figure_scale(4, drop="in_dual"), box(48))
        cfg = EdgeConfig(base.region, np.where(outside, noise, bad.bits))
        assert classify_scale(cfg, 4) is None


def test_no_good_scales_gives_empty_record():
    rec = series_and_count(EdgeConfig.opened(box(64)), 4, 6, [None, None])
    assert rec.count == 0
    assert not rec.holds(1)
    assert rec.holds(0)


def test_two_bridged_scales_are_in_series():
    certs, rec = good_scale_count(two_good_scales(), 4, 6)
    assert all(c is not None for c in certs.values())
    assert rec.scales == (4, 5)
    assert rec.count == 2
    assert rec.primal_links == (True,) and rec.dual_links == (True,)
    assert all(rec.ends.values())
    assert rec.holds(2) and not rec.holds(3)


def test_broken_link_drops_series():
    cfg = two_good_scales(dual_bridge=False)
    certs, rec = good_scale_count(cfg, 4, 6)
    assert rec.good == (4, 5)
    # neither scale alone reaches both ends of Ann(16, 64)
    assert rec.count == 0
    # restricted to its own annulus, scale 4 is in series by itself
    assert series_and_count(cfg, 4, 5, {4: certs[4]}).count == 1


def test_record_serialises():
    _, rec = good_scale_count(two_good_scales(), 4, 6)
    d = rec.to_record()
    assert d["count"] == 2 and d["scales"] == [4, 5]


def test_arms_imply_series_on_samples(rng):
    """Whenever both arms cross, every good scale found is in series."""
    reg = box(64)
    for _ in range(20):
        cfg = random_config(reg, rng)
        certs, rec = good_scale_count(cfg, 4, 6)
        a0, a1 = arm_flags(cfg.to_pixels(), 16, 64)
        if a0 and a1:
            assert rec.count == len(rec.good)

import numpy as np
import pytest

from fkarms.lattice import box
from fkarms.rcmodel import EdgeConfig


def edge_midpoints(region):
    c = region.edge_coords
    return (c[:, 0] + c[:, 2]) / 2, (c[:, 1] + c[:, 3]) / 2


def pattern(region, open_fn):
    """Configuration whose edge is open iff ``open_fn(x, y)`` holds at its midpoint."""
    x, y = edge_midpoints(region)
    return EdgeConfig(region, np.asarray(open_fn(x, y), dtype=np.uint8))


def corridors(N, half_axes=((1, 0), (-1, 0))):
    """Closed background with open corridors of width 2 along the given half-axes."""
    reg = box(N)

    def fn(x, y):
        out = np.zeros_like(x, dtype=bool)
        for dx, dy in half_axes:
            if dx:
                out |= (np.abs(y) <= 1) & (x * dx >= 0)
            else:
                out |= (np.abs(x) <= 1) & (y * dy >= 0)
        return out
    return pattern(reg, fn)


def sectors(N, bounds=(0, 90, 180, 270)):
    """Edges open iff the midpoint angle (degrees) lies in [b0, b1) or [b2, b3).

    The default gives primal NE and SW quadrants and dual NW and SE quadrants.
    """
    reg = box(N)
    b0, b1, b2, b3 = bounds

    def fn(x, y):
        a = np.degrees(np.arctan2(y, x)) % 360
        return ((a >= b0) & (a < b1)) | ((a >= b2) & (a < b3))
    return pattern(reg, fn)


def figure_scale(k, drop=None):
    """Hand-built configuration on Λ_{2^{k+1}} in which scale k is good.

    The north half is primal outside the middle radius and dual inside, the
    south half the reverse; around the two box centres the pattern switches
    to alternating quadrants so each inner flower domain has four petals.
    ``drop="in_dual"`` opens the inner north dual region, destroying one link.
    """
    N = 2 ** (k + 1)
    reg = box(N)
    x, y = edge_midpoints(reg)
    rho = np.maximum(np.abs(x), np.abs(y))
    mid = 1.5 * 2 ** k
    sh = 2 ** k // 5
    north = y > 0
    bits = np.where(north, rho >= mid, rho < mid)
    if drop == "in_dual":
        bits = np.where(north & (rho < mid), True, bits)
    for cx in (-mid, mid):
        u, v = x - cx, y
        inbox = (np.abs(u) <= sh) & (np.abs(v) <= sh)
        bits = np.where(inbox, np.abs(v) < np.abs(u), bits)
    return EdgeConfig(reg, bits.astype(np.uint8))


def random_config(region, rng, p=0.5):
    return EdgeConfig(region, (rng.random(region.n_edges) < p).astype(np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting ------------------------------------------------------------------

_VERDICTS = {}


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def report(number, passed, detail=""):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _VERDICTS[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])

"""Clusters, crossings and arm events.

Arm conventions (doubled-grid norms in brackets):

* type 1: open primal path through vertices with r <= |v| <= R joining
  ∂Λ_r to ∂Λ_R  [1-pixels with norm in [2r, 2R]];
* type 0: open dual path through dual vertices with r < |v*| < R joining the
  dual circles of radius r + 1/2 and R - 1/2  [0-pixels, norms in [2r+1, 2R-1]].

Type 0 fails exactly when an open primal circuit surrounds Λ_r using
vertices of norm r+1..R-1, and type 1 fails exactly when a dual circuit
of norm r+1/2..R-1/2 surrounds it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _graph
from .errors import ParameterError
from .lattice import Region, annulus, box
from .rcmodel import FREE, BoundaryCondition, EdgeConfig, graph_arrays

ARM_TYPES = ("0", "1", "01")


@dataclass(frozen=True)
class ClusterLabels:
    labels: np.ndarray
    count: int

    def connected(self, a: int, b: int) -> bool:
        return bool(self.labels[a] == self.labels[b])


def cluster_labels(config: EdgeConfig, region: Region | None = None,
                   bc: BoundaryCondition = FREE) -> ClusterLabels:
    """Per-vertex component ids with wired classes contracted."""
    region = region or config.region
    if region != config.region:
        raise ParameterError("config does not live on the given region")
    n, eu, ev, *_ = graph_arrays(region, bc)
    lab, k = _graph.component_labels(n, eu, ev, config.bits)
    ids, _ = bc.contraction(region)
    return ClusterLabels(lab[ids], int(k))


@dataclass(frozen=True)
class ArmSpec:
    sigma: str
    r: int
    R: int

    def __post_init__(self):
        if self.sigma not in ARM_TYPES:
            raise ParameterError(f"arm type must be one of {ARM_TYPES}, got {self.sigma!r}")
        if not (1 <= self.r < self.R):
            raise ParameterError(f"arm annulus needs 1 <= r < R, got ({self.r}, {self.R})")


# --- pixel kernels ----------------------------------------------------------------


@njit(cache=True)
def band_reach(img, color, lo, hi):
    """Largest doubled norm reached by ``color`` pixels connected to the ring ``lo``.

    Paths stay inside norms [lo, hi]; returns -1 if no seed pixel has the colour.
    The search stops as soon as norm ``hi`` is reached.
    """
    w = img.shape[0]
    c = (w - 1) // 2
    seen = np.zeros(img.shape, dtype=np.uint8)
    stack = np.empty((w * w, 2), dtype=np.int64)
    top = 0
    best = -1
    for i in range(c - lo, c + lo + 1):
        for j in range(c - lo, c + lo + 1):
            if max(abs(i - c), abs(j - c)) == lo and img[i, j] == color:
                seen[i, j] = 1
                stack[top, 0] = i
                stack[top, 1] = j
                top += 1
                best = lo
    while top > 0:
        top -= 1
        i = stack[top, 0]
        j = stack[top, 1]
        for d in range(4):
            ni = i + (1 if d == 0 else (-1 if d == 1 else 0))
            nj = j + (1 if d == 2 else (-1 if d == 3 else 0))
            if ni < 0 or nj < 0 or ni >= w or nj >= w:
                continue
            nn = max(abs(ni - c), abs(nj - c))
            if nn < lo or nn > hi or seen[ni, nj] or img[ni, nj] != color:
                continue
            seen[ni, nj] = 1
            if nn > best:
                best = nn
                if best == hi:
                    return best
            stack[top, 0] = ni
            stack[top, 1] = nj
            top += 1
    return best


@njit(cache=True)
def box_crossing(img, color, i0, i1, j0, j1, horizontal):
    """Path of ``color`` pixels inside [i0,i1]x[j0,j1] between opposite sides."""
    h = i1 - i0 + 1
    v = j1 - j0 + 1
    seen = np.zeros((h, v), dtype=np.uint8)
    stack = np.empty((h * v, 2), dtype=np.int64)
    top = 0
    if horizontal:
        for j in range(j0, j1 + 1):
            if img[i0, j] == color:
                seen[0, j - j0] = 1
                stack[top, 0] = i0
                stack[top, 1] = j
                top += 1
    else:
        for i in range(i0, i1 + 1):
            if img[i, j0] == color:
                seen[i - i0, 0] = 1
                stack[top, 0] = i
                stack[top, 1] = j0
                top += 1
    while top > 0:
        top -= 1
        i = stack[top, 0]
        j = stack[top, 1]
        if (horizontal and i == i1) or ((not horizontal) and j == j1):
            return True
        for d in range(4):
            ni = i + (1 if d == 0 else (-1 if d == 1 else 0))
            nj = j + (1 if d == 2 else (-1 if d == 3 else 0))
            if ni < i0 or nj < j0 or ni > i1 or nj > j1:
                continue
            if seen[ni - i0, nj - j0] or img[ni, nj] != color:
                continue
            seen[ni - i0, nj - j0] = 1
            stack[top, 0] = ni
            stack[top, 1] = nj
            top += 1
    return False


def arm_radii(img: np.ndarray, r: int) -> tuple[int, int]:
    """Doubled norms reached by the primal and dual arms started at radius ``r``.

    ``A1(r, R)`` holds iff the first value is >= 2R and ``A0(r, R)`` iff the
    second is >= 2R - 1, for every R up to the image window.
    """
    window = (img.shape[0] - 1) // 4
    return (int(band_reach(img, 1, 2 * r, 2 * window)),
            int(band_reach(img, 0, 2 * r + 1, 2 * window - 1)))


def arm_flags(img: np.ndarray, r: int, R: int) -> tuple[bool, bool]:
    """(A0(r,R), A1(r,R)) on a doubled-grid image centred at the origin."""
    a1 = band_reach(img, 1, 2 * r, 2 * R) >= 2 * R
    a0 = band_reach(img, 0, 2 * r + 1, 2 * R - 1) >= 2 * R - 1
    return bool(a0), bool(a1)


def _covers_annulus(region: Region, r: int, R: int) -> bool:
    kp = region.p
    if region.kind == "box":
        return kp["n"] >= R
    if region.kind == "annulus":
        return kp["r"] < r and kp["R"] >= R
    ref = annulus(r - 1, R) if r > 1 else box(R)
    return region.contains_region(ref)


def detect_arm(config: EdgeConfig, spec: ArmSpec) -> bool:
    """Whether the arm event of ``spec`` occurs in ``config``."""
    if not _covers_annulus(config.region, spec.r, spec.R):
        raise ParameterError(f"config region does not contain Ann({spec.r}, {spec.R})")
    img = config.to_pixels(spec.R)
    a0, a1 = arm_flags(img, spec.r, spec.R)
    return {"0": a0, "1": a1, "01": a0 and a1}[spec.sigma]


def _rect_bounds(rect: Region):
    kp = rect.p
    return kp["x0"], kp["y0"], kp["width"], kp["height"]


def detect_crossing(config: EdgeConfig, rect: Region) -> bool:
    """Left-right open primal crossing of the rectangle."""
    if rect.kind != "rectangle":
        raise ParameterError("crossing needs a rectangle region")
    x0, y0, w, h = _rect_bounds(rect)
    window = max(config.region.extent, rect.extent) + 1
    img = config.to_pixels(window)
    o = 2 * window
    return bool(box_crossing(img, 1, 2 * x0 + o, 2 * (x0 + w) + o,
                             2 * y0 + o, 2 * (y0 + h) + o, True))


def detect_dual_crossing(config: EdgeConfig, rect: Region) -> bool:
    """Top-bottom open dual crossing of the dual rectangle.

    The dual rectangle has dual vertices (x + 1/2, y + 1/2) with
    x0 <= x < x0 + w and y0 - 1 <= y <= y0 + h; its edges cross the
    horizontal edges of the rectangle and its interior vertical edges.
    """
    if rect.kind != "rectangle":
        raise ParameterError("crossing needs a rectangle region")
    x0, y0, w, h = _rect_bounds(rect)
    window = max(config.region.extent, rect.extent) + 1
    img = config.to_pixels(window)
    o = 2 * window
    return bool(box_crossing(img, 0, 2 * x0 + 1 + o, 2 * (x0 + w) - 1 + o,
                             2 * y0 - 1 + o, 2 * (y0 + h) + 1 + o, False))


# --- lazily sampled Bernoulli arms --------------------------------------------------


@njit(cache=True)
def _lazy_edge(state, gen, g, ix, iy, p):
    if gen[ix, iy] != g:
        gen[ix, iy] = g
        state[ix, iy] = 1 if np.random.random() < p else 0
    return state[ix, iy]


@njit(cache=True)
def _lazy_search(dual, r, R, p, g, hs, hg, vs, vg, seen, stack):
    """Depth-first arm search on vertices (primal) or dual vertices, edges drawn lazily.

    Coordinates are offset by R.  A dual vertex (a, b) stands for the point
    (a + 1/2, b + 1/2).  Returns the largest doubled norm reached.
    """
    off = 1 if dual else 0
    lo = 2 * r + off
    hi = 2 * R - off
    top = 0
    best = -1
    for a in range(-r - 1, r + 1):
        for b in range(-r - 1, r + 1):
            nrm = max(abs(2 * a + off), abs(2 * b + off))
            if nrm == lo:
                seen[a + R, b + R] = g
                stack[top, 0] = a
                stack[top, 1] = b
                top += 1
                best = lo
    while top > 0:
        top -= 1
        x = stack[top, 0]
        y = stack[top, 1]
        cur = max(abs(2 * x + off), abs(2 * y + off))
        # outward moves are pushed last so the search heads outward first
        for k in range(8):
            d = k % 4
            nx = x + (1 if d == 0 else (-1 if d == 1 else 0))
            ny = y + (1 if d == 2 else (-1 if d == 3 else 0))
            nn = max(abs(2 * nx + off), abs(2 * ny + off))
            if (k < 4) == (nn > cur):
                continue
            if nn < lo or nn > hi or seen[nx + R, ny + R] == g:
                continue
            if dual:
                if d == 0:
                    open_ = _lazy_edge(vs, vg, g, x + 1 + R, y + R, p) == 0
                elif d == 1:
                    open_ = _lazy_edge(vs, vg, g, x + R, y + R, p) == 0
                elif d == 2:
                    open_ = _lazy_edge(hs, hg, g, x + R, y + 1 + R, p) == 0
                else:
                    open_ = _lazy_edge(hs, hg, g, x + R, y + R, p) == 0
            else:
                if d == 0:
                    open_ = _lazy_edge(hs, hg, g, x + R, y + R, p) == 1
                elif d == 1:
                    open_ = _lazy_edge(hs, hg, g, x - 1 + R, y + R, p) == 1
                elif d == 2:
                    open_ = _lazy_edge(vs, vg, g, x + R, y + R, p) == 1
                else:
                    open_ = _lazy_edge(vs, vg, g, x + R, y - 1 + R, p) == 1
            if not open_:
                continue
            seen[nx + R, ny + R] = g
            if nn > best:
                best = nn
                if best == hi:
                    return best
            stack[top, 0] = nx
            stack[top, 1] = ny
            top += 1
    return best


@njit(cache=True)
def bernoulli_arm_radii(r, R, p, n_samples, seed):
    """Primal and dual arm reach (doubled norms) for independent Bernoulli(p) samples.

    Edge states are drawn only when a search first touches them, which is
    exact for a product measure; both searches of a sample share the draws.
    Row ``s`` of the result holds sample ``s``: ``A1(r, R')`` holds iff
    column 0 is >= 2R' and ``A0(r, R')`` iff column 1 is >= 2R' - 1.
    """
    np.random.seed(seed)
    w = 2 * R + 2
    hs = np.zeros((w, w), dtype=np.uint8)
    vs = np.zeros((w, w), dtype=np.uint8)
    hg = np.zeros((w, w), dtype=np.int32)
    vg = np.zeros((w, w), dtype=np.int32)
    pseen = np.zeros((w, w), dtype=np.int32)
    dseen = np.zeros((w, w), dtype=np.int32)
    stack = np.empty((w * w, 2), dtype=np.int64)
    out = np.empty((n_samples, 2), dtype=np.int64)
    for s in range(n_samples):
        g = s + 1
        out[s, 0] = _lazy_search(False, r, R, p, g, hs, hg, vs, vg, pseen, stack)
        out[s, 1] = _lazy_search(True, r, R, p, g, hs, hg, vs, vg, dseen, stack)
    return out

"""Interfaces, flower domains and double four-petal flower domains.

Everything here works on the doubled-grid image of a configuration (see
``lattice``).  Pixels are unit squares; an interface is a path along pixel
sides separating a 1-pixel (primal) from a 0-pixel (dual).  Primal vertex
pixels and dual vertex pixels always sit on a diagonal around each pixel
corner, so no corner has the checkerboard pattern and every corner carries
zero or two interface segments: tracing is deterministic with no turning
ambiguity.

Corner (a, b) of a crop is the point shared by pixels (a-1, b-1), (a, b-1),
(a-1, b) and (a, b).  Horizontal segment ``h[a, b]`` joins corners (a, b) and
(a+1, b) and separates pixels (a, b-1) and (a, b); vertical segment
``v[a, b]`` joins (a, b) and (a, b+1) and separates (a-1, b) and (a, b).

For an inner flower domain between Λ_R and Λ_r the annulus consists of
pixels with doubled norm in [2r+1, 2R].  Interfaces start on the outer
perimeter and stop when they come back to it or when they reach a corner
touching Λ_r (a tip).  Pixels touching a visited non-tip corner, together with
the whole starting ring, are *revealed*; the flower domain is the component of
the complement of the interfaces containing Λ_r, minus the revealed pixels.
Outer flower domains are the mirror image (annulus [2r, 2R-1], start on the
inner perimeter, tips touch norm 2R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ParameterError
from .lattice import linf
from .rcmodel import EdgeConfig

INNER, OUTER = "inner", "outer"


# --- compiled tracing ------------------------------------------------------------


@njit(cache=True)
def _norm(i, j, c):
    return max(abs(i - c), abs(j - c))


@njit(cache=True)
def _in_ann(i, j, m, c, lo, hi):
    if i < 0 or j < 0 or i >= m or j >= m:
        return False
    n = max(abs(i - c), abs(j - c))
    return lo <= n <= hi


@njit(cache=True)
def _corner_kind(a, b, c, lo, hi):
    """0 interior, 1 outer perimeter (touches norm > hi), 2 inner perimeter (norm < lo)."""
    mx = -1
    mn = 1 << 40
    for i in (a - 1, a):
        for j in (b - 1, b):
            n = max(abs(i - c), abs(j - c))
            mx = max(mx, n)
            mn = min(mn, n)
    if mx > hi:
        return 1
    if mn < lo:
        return 2
    return 0


@njit(cache=True)
def _seg_live(img, m, c, lo, hi, horiz, a, b):
    """Whether a segment is an interface segment inside the annulus."""
    if horiz:
        i1, j1, i2, j2 = a, b - 1, a, b
    else:
        i1, j1, i2, j2 = a - 1, b, a, b
    if not (_in_ann(i1, j1, m, c, lo, hi) and _in_ann(i2, j2, m, c, lo, hi)):
        return False
    return img[i1, j1] != img[i2, j2]


@njit(cache=True)
def _left_pixel(a, b, d):
    """Pixel on the left when leaving corner (a, b) in direction d (E, W, N, S)."""
    if d == 0:
        return a, b
    if d == 1:
        return a - 1, b - 1
    if d == 2:
        return a - 1, b
    return a, b - 1


@njit(cache=True)
def trace_kernel(img, lo, hi, start_outer):
    """Trace every interface of the annulus [lo, hi] starting on one perimeter.

    Returns corner paths (flattened with offsets), per-interface end kind
    (1 = tip, 0 = came back), left colour, the revealed-pixel mask and the
    segment barrier masks.
    """
    m = img.shape[0]
    c = (m - 1) // 2
    hbar = np.zeros((m + 1, m + 1), dtype=np.uint8)
    vbar = np.zeros((m + 1, m + 1), dtype=np.uint8)
    revealed = np.zeros((m, m), dtype=np.uint8)
    start_kind = 1 if start_outer else 2
    tip_kind = 2 if start_outer else 1
    ring = hi if start_outer else lo
    for i in range(m):
        for j in range(m):
            if _norm(i, j, c) == ring:
                revealed[i, j] = 1
    cap = 16 * (m + 1) * (m + 1) + 16
    pts = np.empty((cap, 2), dtype=np.int64)
    npts = 0
    offsets = np.zeros(4 * m + 8, dtype=np.int64)
    ends = np.zeros(4 * m + 8, dtype=np.int64)
    lefts = np.zeros(4 * m + 8, dtype=np.int64)
    nint = 0
    for a0 in range(m + 1):
        for b0 in range(m + 1):
            if _corner_kind(a0, b0, c, lo, hi) != start_kind:
                continue
            for d0 in range(4):
                # segment leaving (a0, b0) in direction d0
                if d0 == 0:
                    hz, sa, sb = True, a0, b0
                elif d0 == 1:
                    hz, sa, sb = True, a0 - 1, b0
                elif d0 == 2:
                    hz, sa, sb = False, a0, b0
                else:
                    hz, sa, sb = False, a0, b0 - 1
                if sa < 0 or sb < 0 or sa > m or sb > m:
                    continue
                if hz and hbar[sa, sb]:
                    continue
                if (not hz) and vbar[sa, sb]:
                    continue
                if not _seg_live(img, m, c, lo, hi, hz, sa, sb):
                    continue
                if nint + 1 >= len(offsets):
                    grown = np.zeros(2 * len(offsets), dtype=np.int64)
                    grown[:len(offsets)] = offsets
                    offsets = grown
                    g2 = np.zeros(2 * len(ends), dtype=np.int64)
                    g2[:len(ends)] = ends
                    ends = g2
                    g3 = np.zeros(2 * len(lefts), dtype=np.int64)
                    g3[:len(lefts)] = lefts
                    lefts = g3
                offsets[nint] = npts
                li, lj = _left_pixel(a0, b0, d0)
                lefts[nint] = img[li, lj]
                a, b, d = a0, b0, d0
                pts[npts, 0] = a
                pts[npts, 1] = b
                npts += 1
                for i in (a - 1, a):
                    for j in (b - 1, b):
                        if _in_ann(i, j, m, c, lo, hi):
                            revealed[i, j] = 1
                end = 0
                while True:
                    if d == 0:
                        hbar[a, b] = 1
                        a += 1
                    elif d == 1:
                        hbar[a - 1, b] = 1
                        a -= 1
                    elif d == 2:
                        vbar[a, b] = 1
                        b += 1
                    else:
                        vbar[a, b - 1] = 1
                        b -= 1
                    pts[npts, 0] = a
                    pts[npts, 1] = b
                    npts += 1
                    kind = _corner_kind(a, b, c, lo, hi)
                    if kind == tip_kind:
                        end = 1
                        break
                    for i in (a - 1, a):
                        for j in (b - 1, b):
                            if _in_ann(i, j, m, c, lo, hi):
                                revealed[i, j] = 1
                    if kind == start_kind:
                        break
                    back = d ^ 1
                    nxt = -1
                    for dd in range(4):
                        if dd == back:
                            continue
                        if dd == 0:
                            live = _seg_live(img, m, c, lo, hi, True, a, b)
                        elif dd == 1:
                            live = _seg_live(img, m, c, lo, hi, True, a - 1, b)
                        elif dd == 2:
                            live = _seg_live(img, m, c, lo, hi, False, a, b)
                        else:
                            live = _seg_live(img, m, c, lo, hi, False, a, b - 1)
                        if live:
                            nxt = dd
                            break
                    if nxt < 0:
                        raise RuntimeError("interface dead end")
                    d = nxt
                ends[nint] = end
                nint += 1
    offsets[nint] = npts
    return pts[:npts].copy(), offsets[:nint + 1].copy(), ends[:nint].copy(), \
        lefts[:nint].copy(), revealed, hbar, vbar


@njit(cache=True)
def flood_kernel(allowed, seeds, hbar, vbar):
    """Label pixels of ``allowed`` reachable from ``seeds`` without crossing barriers."""
    m = allowed.shape[0]
    out = np.zeros((m, m), dtype=np.uint8)
    stack = np.empty((m * m, 2), dtype=np.int64)
    top = 0
    for i in range(m):
        for j in range(m):
            if seeds[i, j] and allowed[i, j]:
                out[i, j] = 1
                stack[top, 0] = i
                stack[top, 1] = j
                top += 1
    while top > 0:
        top -= 1
        i = stack[top, 0]
        j = stack[top, 1]
        for d in range(4):
            if d == 0:
                ni, nj, blocked = i + 1, j, vbar[i + 1, j]
            elif d == 1:
                ni, nj, blocked = i - 1, j, vbar[i, j]
            elif d == 2:
                ni, nj, blocked = i, j + 1, hbar[i, j + 1]
            else:
                ni, nj, blocked = i, j - 1, hbar[i, j]
            if blocked or ni < 0 or nj < 0 or ni >= m or nj >= m:
                continue
            if out[ni, nj] or not allowed[ni, nj]:
                continue
            out[ni, nj] = 1
            stack[top, 0] = ni
            stack[top, 1] = nj
            top += 1
    return out


@njit(cache=True)
def label_kernel(allowed, hbar, vbar):
    """Connected components (1-based labels) of ``allowed`` under barrier rules."""
    m = allowed.shape[0]
    lab = np.zeros((m, m), dtype=np.int64)
    stack = np.empty((m * m, 2), dtype=np.int64)
    k = 0
    for si in range(m):
        for sj in range(m):
            if not allowed[si, sj] or lab[si, sj]:
                continue
            k += 1
            lab[si, sj] = k
            top = 1
            stack[0, 0] = si
            stack[0, 1] = sj
            while top > 0:
                top -= 1
                i = stack[top, 0]
                j = stack[top, 1]
                for d in range(4):
                    if d == 0:
                        ni, nj, blocked = i + 1, j, vbar[i + 1, j]
                    elif d == 1:
                        ni, nj, blocked = i - 1, j, vbar[i, j]
                    elif d == 2:
                        ni, nj, blocked = i, j + 1, hbar[i, j + 1]
                    else:
                        ni, nj, blocked = i, j - 1, hbar[i, j]
                    if blocked or ni < 0 or nj < 0 or ni >= m or nj >= m:
                        continue
                    if lab[ni, nj] or not allowed[ni, nj]:
                        continue
                    lab[ni, nj] = k
                    stack[top, 0] = ni
                    stack[top, 1] = nj
                    top += 1
    return lab, k


@njit(cache=True)
def color_components(img, allowed):
    """4-connected components of equal colour inside ``allowed`` (1-based labels)."""
    m0, m1 = img.shape
    lab = np.zeros((m0, m1), dtype=np.int64)
    stack = np.empty((m0 * m1, 2), dtype=np.int64)
    k = 0
    for si in range(m0):
        for sj in range(m1):
            if not allowed[si, sj] or lab[si, sj]:
                continue
            k += 1
            col = img[si, sj]
            lab[si, sj] = k
            top = 1
            stack[0, 0] = si
            stack[0, 1] = sj
            while top > 0:
                top -= 1
                i = stack[top, 0]
                j = stack[top, 1]
                for d in range(4):
                    ni = i + (1 if d == 0 else (-1 if d == 1 else 0))
                    nj = j + (1 if d == 2 else (-1 if d == 3 else 0))
                    if ni < 0 or nj < 0 or ni >= m0 or nj >= m1:
                        continue
                    if lab[ni, nj] or not allowed[ni, nj] or img[ni, nj] != col:
                        continue
                    lab[ni, nj] = k
                    stack[top, 0] = ni
                    stack[top, 1] = nj
                    top += 1
    return lab, k


@njit(cache=True)
def path_length(img, allowed, src, dst):
    """Shortest 4-path length (in pixels) of one colour from ``src`` to ``dst`` masks.

    Returns -1 if no path exists.  The colour is that of the source pixels.
    """
    m0, m1 = img.shape
    dist = -np.ones((m0, m1), dtype=np.int64)
    q = np.empty((m0 * m1, 2), dtype=np.int64)
    h = 0
    t = 0
    col = -1
    for i in range(m0):
        for j in range(m1):
            if src[i, j] and allowed[i, j]:
                col = img[i, j]
                dist[i, j] = 0
                q[t, 0] = i
                q[t, 1] = j
                t += 1
    while h < t:
        i = q[h, 0]
        j = q[h, 1]
        h += 1
        if dst[i, j]:
            return dist[i, j]
        for d in range(4):
            ni = i + (1 if d == 0 else (-1 if d == 1 else 0))
            nj = j + (1 if d == 2 else (-1 if d == 3 else 0))
            if ni < 0 or nj < 0 or ni >= m0 or nj >= m1:
                continue
            if dist[ni, nj] >= 0 or not allowed[ni, nj] or img[ni, nj] != col:
                continue
            dist[ni, nj] = dist[i, j] + 1
            q[t, 0] = ni
            q[t, 1] = nj
            t += 1
    return -1


# --- data types --------------------------------------------------------------------


@dataclass
class Interface:
    """Corner path (crop coordinates) of one traced interface.

    ``left_color`` is the pixel colour on the left of the path in tracing
    order; ``tip`` tells whether it ended on the far boundary.
    """

    corners: np.ndarray
    tip: bool
    left_color: int

    def oriented(self) -> np.ndarray:
        """Corner path oriented so that primal pixels are on the left."""
        return self.corners if self.left_color == 1 else self.corners[::-1]

    def steps(self):
        return len(self.corners) - 1


@dataclass
class Petal:
    """Boundary arc of a flower domain.

    ``parity`` is 1 for primal and 0 for dual.  ``endpoints`` are the points
    where the two slits bounding the arc leave the starting boundary, in
    lattice coordinates (``None`` for a single circuit petal); ``tips`` are
    where the same slits touch the far boundary.  ``mask`` marks the arc's
    pixels in the crop.
    """

    parity: int
    endpoints: tuple | None
    mask: np.ndarray = field(repr=False)
    tips: tuple | None = None

    def span(self) -> float:
        if self.endpoints is None:
            return 0.0
        (x1, y1), (x2, y2) = self.endpoints
        return max(abs(x1 - x2), abs(y1 - y2))


@dataclass
class FlowerDomain:
    """Inner or outer flower domain extracted from a crop of the pixel image.

    Crop pixel (i, j) is global pixel ``(i + offset[0], j + offset[1])``.
    ``domain`` marks the unrevealed pixels of the complement component
    (including Λ_r for an inner domain and the outer ring for an outer one).
    """

    orientation: str
    center: tuple
    r: int
    R: int
    offset: tuple
    interfaces: list
    petals: list
    domain: np.ndarray = field(repr=False)
    component: np.ndarray = field(repr=False)
    revealed: np.ndarray = field(repr=False)

    @property
    def n_petals(self) -> int:
        return len(self.petals)

    def signature(self):
        """Hashable summary used to compare domains bit for bit."""
        return (self.orientation, self.center, self.r, self.R,
                self.domain.tobytes(),
                tuple((p.parity, p.endpoints, p.mask.tobytes()) for p in self.petals))

    def petal_parities(self) -> list:
        return [p.parity for p in self.petals]

    def global_mask(self, shape, mask) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        m = mask.shape[0]
        out[self.offset[0]:self.offset[0] + m, self.offset[1]:self.offset[1] + m] = mask
        return out

    def dump(self) -> str:
        """Plain-text geometry: one line per petal, then one per interface."""
        lines = [f"# {self.orientation} flower domain center={self.center} "
                 f"r={self.r} R={self.R} petals={self.n_petals}"]
        for k, p in enumerate(self.petals):
            ends = "circuit" if p.endpoints is None else \
                " ".join(f"{x:.1f},{y:.1f}" for x, y in p.endpoints)
            pix = np.argwhere(p.mask)
            pts = " ".join(f"{self._lattice(i, j)[0]:.1f},{self._lattice(i, j)[1]:.1f}"
                           for i, j in pix)
            lines.append(f"petal {k} parity={p.parity} ends={ends} arc={pts}")
        for k, itf in enumerate(self.interfaces):
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in
                           (self._corner_lattice(a, b) for a, b in itf.corners))
            lines.append(f"interface {k} tip={int(itf.tip)} path={pts}")
        return "\n".join(lines) + "\n"

    def _lattice(self, i, j):
        m = self.domain.shape[0]
        c = (m - 1) // 2
        return (self.center[0] + (i - c) / 2, self.center[1] + (j - c) / 2)

    def _corner_lattice(self, a, b):
        m = self.domain.shape[0]
        c = (m - 1) // 2
        return (self.center[0] + (a - c - 0.5) / 2, self.center[1] + (b - c - 0.5) / 2)


def crop(img: np.ndarray, center, radius2: int):
    """Square crop of doubled radius ``radius2`` around a lattice point."""
    window = (img.shape[0] - 1) // 4
    gi, gj = 2 * center[0] + 2 * window, 2 * center[1] + 2 * window
    if gi - radius2 < 0 or gj - radius2 < 0 or gi + radius2 >= img.shape[0] \
            or gj + radius2 >= img.shape[1]:
        raise ParameterError("flower domain leaves the configuration window")
    return img[gi - radius2:gi + radius2 + 1, gj - radius2:gj + radius2 + 1], \
        (gi - radius2, gj - radius2)


def _ring_order(m: int, ring: int):
    c = (m - 1) // 2
    pts = [(i, j) for i in range(m) for j in range(m) if max(abs(i - c), abs(j - c)) == ring]
    pts.sort(key=lambda t: math.atan2(t[1] - c, t[0] - c))
    return pts


def flower_domain_from_image(img: np.ndarray, r: int, R: int, orientation: str,
                             center=(0, 0)) -> FlowerDomain:
    """Flower domain between Λ_R and Λ_r (inner) or Λ_r and Λ_R (outer), centred at ``center``."""
    if not (0 <= r < R):
        raise ParameterError(f"flower domain needs 0 <= r < R, got ({r}, {R})")
    sub, offset = crop(img, center, 2 * R)
    sub = np.ascontiguousarray(sub)
    m = sub.shape[0]
    c = (m - 1) // 2
    if orientation == INNER:
        lo, hi, start_outer = 2 * r + 1, 2 * R, True
    elif orientation == OUTER:
        lo, hi, start_outer = 2 * r, 2 * R - 1, False
    else:
        raise ParameterError(f"orientation must be inner or outer, got {orientation!r}")
    pts, offs, ends, lefts, revealed, hbar, vbar = trace_kernel(sub, lo, hi, start_outer)
    interfaces = [Interface(pts[offs[k]:offs[k + 1]].copy(), bool(ends[k]), int(lefts[k]))
                  for k in range(len(ends))]
    I, J = np.indices((m, m))
    nrm = np.maximum(np.abs(I - c), np.abs(J - c))
    ann = (nrm >= lo) & (nrm <= hi)
    if orientation == INNER:
        target = nrm < lo
        allowed = np.ones((m, m), dtype=np.uint8)
        tip_ring = lo
    else:
        target = nrm > hi
        allowed = (nrm >= lo).astype(np.uint8)
        tip_ring = hi
    omega = flood_kernel(allowed, target.astype(np.uint8), hbar, vbar).astype(bool)
    domain = omega & ~revealed.astype(bool)
    sect, nsect = label_kernel((omega & ann).astype(np.uint8), hbar, vbar)

    tips = {}
    for itf in interfaces:
        if itf.tip:
            tips[_segment_key(itf.corners[-2], itf.corners[-1])] = (
                tuple(itf.corners[-1]), tuple(itf.corners[0]))
    ring = _ring_order(m, tip_ring)
    rev = revealed.astype(bool)

    def corner_lattice(a, b):
        return (center[0] + (a - c - 0.5) / 2, center[1] + (b - c - 0.5) / 2)

    def arc_parity(mask):
        cols = np.unique(sub[mask])
        if len(cols) != 1:
            raise RuntimeError("petal arc is not monochromatic")
        return int(cols[0])

    # Ring pixels pinched off between two slits sharing a tip corner are not
    # in the domain; neighbouring sectors of equal colour form a single arc.
    idx = [k for k, (i, j) in enumerate(ring) if sect[i, j] > 0]
    labels = [int(sect[ring[k]]) for k in idx]
    parity = {lab: arc_parity(rev & (sect == lab)) for lab in set(labels)}
    n = len(idx)
    cuts = [t for t in range(n) if parity[labels[t]] != parity[labels[(t + 1) % n]]]
    if len(cuts) % 2:
        raise RuntimeError("odd number of colour changes around the domain")
    petals = []
    if not cuts:
        mask = rev & omega & ann
        petals.append(Petal(arc_parity(mask), None, mask))
    else:
        tip_pts = []
        for t in cuts:
            k = idx[t]
            (i1, j1), (i2, j2) = ring[k], ring[(k + 1) % len(ring)]
            tip_pts.append(_segment_tip(i1, j1, i2, j2, tips))
        for u, t in enumerate(cuts):
            stop = cuts[(u + 1) % len(cuts)]
            group = set()
            s_ = (t + 1) % n
            while True:
                group.add(labels[s_])
                if s_ == stop:
                    break
                s_ = (s_ + 1) % n
            mask = rev & np.isin(sect, list(group))
            t0, t1 = tip_pts[u], tip_pts[(u + 1) % len(cuts)]
            ends = (corner_lattice(*t0[1]), corner_lattice(*t1[1]))
            near = (corner_lattice(*t0[0]), corner_lattice(*t1[0]))
            petals.append(Petal(arc_parity(mask), ends, mask, near))
    return FlowerDomain(orientation, tuple(center), r, R, offset, interfaces, petals,
                        domain, omega, rev)


def _segment_key(p, q):
    (a1, b1), (a2, b2) = p, q
    if b1 == b2:
        return (True, int(min(a1, a2)), int(b1))
    return (False, int(a1), int(min(b1, b2)))


def _segment_tip(i1, j1, i2, j2, tips):
    """Tip corner of the slit separating two consecutive ring pixels."""
    key = (True, i1, max(j1, j2)) if i1 == i2 else (False, max(i1, i2), j1)
    if key not in tips:
        raise RuntimeError("no traced slit ends between consecutive ring pixels")
    return tips[key]


def flower_domain(config: EdgeConfig, r: int, R: int, orientation: str,
                  center=(0, 0)) -> FlowerDomain:
    """Flower domain of an edge configuration (see ``flower_domain_from_image``)."""
    window = max(config.region.extent, linf(center) + R)
    return flower_domain_from_image(config.to_pixels(window), r, R, orientation, center)


def trace_interfaces(config: EdgeConfig, r: int, R: int, start: str = "outer_boundary",
                     center=(0, 0)) -> list:
    """All interfaces of the annulus between Λ_r and Λ_R started on one boundary."""
    if start not in ("outer_boundary", "inner_boundary"):
        raise ParameterError(f"unknown start boundary {start!r}")
    orient = INNER if start == "outer_boundary" else OUTER
    return flower_domain(config, r, R, orient, center).interfaces


def is_well_separated(fd: FlowerDomain, scale: int | None = None) -> bool:
    """At least two petals, each with endpoints more than ``scale / 2`` apart.

    ``scale`` defaults to r for an inner domain and R for an outer one.
    """
    if scale is None:
        scale = fd.r if fd.orientation == INNER else fd.R
    if fd.n_petals < 2:
        return False
    return all(p.span() > scale / 2 for p in fd.petals)


@dataclass
class DoubleFlowerCertificate:
    inner: FlowerDomain
    outer: FlowerDomain
    witnesses: list

    def summary(self) -> dict:
        return {"inner_petals": [(p.parity, p.endpoints) for p in self.inner.petals],
                "outer_petals": [(p.parity, p.endpoints) for p in self.outer.petals],
                "witness_lengths": [w[2] for w in self.witnesses]}


def find_double_four_petal_image(img: np.ndarray, r: int, R: int,
                                 center=(0, 0)) -> DoubleFlowerCertificate | None:
    """Double four-petal flower domain between Λ_r and Λ_R on a pixel image."""
    if not (1 <= r < R):
        raise ParameterError(f"need 1 <= r < R, got ({r}, {R})")
    mid = math.isqrt(r * R)
    if not (r < mid < R):
        return None
    inner = flower_domain_from_image(img, r, mid, INNER, center)
    if inner.n_petals != 4 or not is_well_separated(inner):
        return None
    outer = flower_domain_from_image(img, mid, R, OUTER, center)
    if outer.n_petals != 4 or not is_well_separated(outer):
        return None
    sub, off = crop(img, center, 2 * R)
    m = sub.shape[0]
    d_in = inner.global_mask(img.shape, inner.domain)[off[0]:off[0] + m, off[1]:off[1] + m]
    d_out = outer.global_mask(img.shape, outer.domain)[off[0]:off[0] + m, off[1]:off[1] + m]
    allowed = ~(d_in | d_out)
    sub = np.ascontiguousarray(sub)
    lab, _ = color_components(sub, allowed.astype(np.uint8))
    witnesses = []
    for a, pin in enumerate(inner.petals):
        pm = inner.global_mask(img.shape, pin.mask)[off[0]:off[0] + m, off[1]:off[1] + m]
        in_labels = set(np.unique(lab[pm & allowed])) - {0}
        found = None
        for b, pout in enumerate(outer.petals):
            if pout.parity != pin.parity:
                continue
            qm = outer.global_mask(img.shape, pout.mask)[off[0]:off[0] + m, off[1]:off[1] + m]
            if in_labels & set(np.unique(lab[qm & allowed])):
                length = int(path_length(sub, allowed.astype(np.uint8), pm, qm))
                found = (a, b, length)
                break
        if found is None:
            return None
        witnesses.append(found)
    return DoubleFlowerCertificate(inner, outer, witnesses)


def find_double_four_petal(config: EdgeConfig, r: int, R: int,
                           center=(0, 0)) -> DoubleFlowerCertificate | None:
    window = max(config.region.extent, linf(center) + R)
    return find_double_four_petal_image(config.to_pixels(window), r, R, center)

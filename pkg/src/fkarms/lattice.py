"""Square-lattice geometry: boxes, annuli, rectangles, dual edges and scale layouts.

Vertices are integer points of Z^2 and the metric is L-infinity throughout.
Large configurations are handled on a doubled "pixel" grid: the point with
doubled coordinates (I, J) is a primal vertex when both are even, a dual
vertex when both are odd, and the midpoint of an edge otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ParameterError, ScaleTooSmallError

KINDS = ("box", "annulus", "rectangle", "graph")
MIN_SCALE = 4


@dataclass(frozen=True)
class Region:
    """Finite subgraph of Z^2 induced by a vertex set (or given by an edge list).

    ``kind`` is one of box (radius ``n``), annulus (``r`` < norm <= ``R``),
    rectangle (``width`` x ``height`` with lower-left corner ``x0``, ``y0``)
    or graph (explicit ``edges``; used for small oracle graphs).
    """

    kind: str
    params: tuple

    @property
    def p(self) -> dict:
        return dict(self.params)

    def to_record(self) -> dict:
        rec = {}
        for key, val in self.params:
            rec[key] = [list(map(list, e)) for e in val] if key == "edges" else val
        return {"kind": self.kind, "params": rec}

    @staticmethod
    def from_record(rec: dict) -> "Region":
        params = dict(rec["params"])
        if "edges" in params:
            params["edges"] = [tuple(map(tuple, e)) for e in params["edges"]]
        return make_region(rec["kind"], **params)

    # --- vertex and edge sets -------------------------------------------------

    @cached_property
    def vertices(self) -> np.ndarray:
        """(V, 2) integer coordinates in lexicographic order."""
        kp = self.p
        if self.kind == "graph":
            pts = sorted({v for e in kp["edges"] for v in e})
            return np.array(pts, dtype=np.int64).reshape(-1, 2)
        if self.kind == "rectangle":
            xs = np.arange(kp["x0"], kp["x0"] + kp["width"] + 1)
            ys = np.arange(kp["y0"], kp["y0"] + kp["height"] + 1)
        else:
            n = kp["n"] if self.kind == "box" else kp["R"]
            xs = ys = np.arange(-n, n + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1).astype(np.int64)
        if self.kind == "annulus":
            norm = np.abs(pts).max(axis=1)
            pts = pts[norm > kp["r"]]
        return pts

    @cached_property
    def _lookup(self):
        v = self.vertices
        lo = v.min(axis=0) if len(v) else np.zeros(2, np.int64)
        hi = v.max(axis=0) if len(v) else np.zeros(2, np.int64)
        grid = -np.ones((hi[0] - lo[0] + 3, hi[1] - lo[1] + 3), dtype=np.int64)
        grid[v[:, 0] - lo[0] + 1, v[:, 1] - lo[1] + 1] = np.arange(len(v))
        return lo, grid

    def index_array(self, pts: np.ndarray) -> np.ndarray:
        """Vertex indices of integer points (``-1`` for points outside)."""
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        lo, grid = self._lookup
        gx = pts[:, 0] - lo[0] + 1
        gy = pts[:, 1] - lo[1] + 1
        ok = (gx >= 0) & (gy >= 0) & (gx < grid.shape[0]) & (gy < grid.shape[1])
        out = -np.ones(len(pts), dtype=np.int64)
        out[ok] = grid[gx[ok], gy[ok]]
        return out

    def index_of(self, xy) -> int:
        idx = int(self.index_array(np.array(xy))[0])
        if idx < 0:
            raise KeyError(f"vertex {tuple(xy)} not in region")
        return idx

    @cached_property
    def edges(self) -> np.ndarray:
        """(E, 2) vertex-index pairs, ordered lexicographically by coordinates."""
        v = self.vertices
        if self.kind == "graph":
            a, b = [], []
            for e in self.p["edges"]:
                u, w = sorted(e)
                a.append(u)
                b.append(w)
            ia = self.index_array(np.array(a).reshape(-1, 2))
            ib = self.index_array(np.array(b).reshape(-1, 2))
            pairs = np.stack([ia, ib], axis=1)
        else:
            right = self.index_array(v + np.array([1, 0]))
            up = self.index_array(v + np.array([0, 1]))
            own = np.arange(len(v))
            pairs = np.concatenate([
                np.stack([own[right >= 0], right[right >= 0]], axis=1),
                np.stack([own[up >= 0], up[up >= 0]], axis=1),
            ])
        pairs = pairs.reshape(-1, 2).astype(np.int64)
        c = np.concatenate([v[pairs[:, 0]], v[pairs[:, 1]]], axis=1)
        order = np.lexsort((c[:, 3], c[:, 2], c[:, 1], c[:, 0]))
        return pairs[order]

    @cached_property
    def edge_coords(self) -> np.ndarray:
        """(E, 4) array ``x1, y1, x2, y2`` with the lower endpoint first."""
        v = self.vertices
        e = self.edges
        return np.concatenate([v[e[:, 0]], v[e[:, 1]]], axis=1)

    @cached_property
    def boundary(self) -> np.ndarray:
        """Indices of vertices having a lattice neighbour outside the region."""
        v = self.vertices
        outside = np.zeros(len(v), dtype=bool)
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            outside |= self.index_array(v + np.array(d)) < 0
        return np.nonzero(outside)[0]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def extent(self) -> int:
        """Largest L-infinity norm of a vertex."""
        if self.n_vertices == 0:
            return 0
        return int(np.abs(self.vertices).max())

    def edge_index(self, u, w) -> int:
        """Index of the edge joining lattice points ``u`` and ``w``."""
        a, b = sorted([tuple(u), tuple(w)])
        c = self.edge_coords
        hit = np.nonzero((c[:, 0] == a[0]) & (c[:, 1] == a[1])
                         & (c[:, 2] == b[0]) & (c[:, 3] == b[1]))[0]
        if len(hit) == 0:
            raise KeyError(f"edge {a}-{b} not in region")
        return int(hit[0])

    def contains_region(self, other: "Region") -> bool:
        """True if every edge of ``other`` is an edge of this region."""
        if other.n_edges == 0:
            return bool(np.all(self.index_array(other.vertices) >= 0))
        c = other.edge_coords
        ia = self.index_array(c[:, :2])
        ib = self.index_array(c[:, 2:])
        return bool(np.all(ia >= 0) and np.all(ib >= 0))

    # --- pixel geometry ------------------------------------------------------

    def edge_pixels(self, window: int) -> tuple[np.ndarray, np.ndarray]:
        """Pixel indices of edge midpoints in the doubled grid of ``Λ_window``."""
        c = self.edge_coords
        return c[:, 0] + c[:, 2] + 2 * window, c[:, 1] + c[:, 3] + 2 * window


def make_region(kind: str, **params) -> Region:
    """Build a region after validating its parameters."""
    if kind not in KINDS:
        raise ParameterError(f"unknown region kind {kind!r}")
    if kind == "box":
        n = params.get("n")
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ParameterError(f"box radius must be a non-negative integer, got {n!r}")
        return Region("box", (("n", int(n)),))
    if kind == "annulus":
        r, R = params.get("r"), params.get("R")
        if r is None or R is None or not (0 < r < R):
            raise ParameterError(f"annulus needs 0 < r < R, got r={r!r}, R={R!r}")
        return Region("annulus", (("R", int(R)), ("r", int(r))))
    if kind == "rectangle":
        w, h = params.get("width"), params.get("height")
        if w is None or h is None or w < 0 or h < 0:
            raise ParameterError(f"rectangle needs non-negative width/height, got {w!r}x{h!r}")
        x0, y0 = int(params.get("x0", 0)), int(params.get("y0", 0))
        return Region("rectangle", (("height", int(h)), ("width", int(w)),
                                    ("x0", x0), ("y0", y0)))
    edges = params.get("edges")
    if edges is None:
        raise ParameterError("graph region needs an edge list")
    norm = []
    for e in edges:
        (a, b) = (tuple(int(t) for t in e[0]), tuple(int(t) for t in e[1]))
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            raise ParameterError(f"{a}-{b} is not a nearest-neighbour edge")
        norm.append(tuple(sorted((a, b))))
    return Region("graph", (("edges", tuple(sorted(set(norm)))),))


def box(n: int) -> Region:
    return make_region("box", n=n)


def annulus(r: int, R: int) -> Region:
    return make_region("annulus", r=r, R=R)


def rectangle(width: int, height: int, x0: int = 0, y0: int = 0) -> Region:
    return make_region("rectangle", width=width, height=height, x0=x0, y0=y0)


def subgraph(edges) -> Region:
    return make_region("graph", edges=edges)


def linf(v) -> int:
    return max(abs(v[0]), abs(v[1]))


def dual_edge(e):
    """Edge of the shifted lattice crossing ``e``.

    Works on both lattices: an edge with half-integer coordinates is treated
    as an edge of Z^2 + (1/2, 1/2), so applying the map twice is the identity.
    Coordinates are returned as ``Fraction`` pairs.
    """
    (a, b) = [tuple(Fraction(t) for t in v) for v in e]
    if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
        raise ParameterError(f"{e} is not a nearest-neighbour edge")
    half = Fraction(1, 2)
    shift = half if a[0].denominator == 2 else Fraction(0)
    a = (a[0] - shift, a[1] - shift)
    b = (b[0] - shift, b[1] - shift)
    a, b = sorted([a, b])
    if a[1] == b[1]:
        d = ((a[0] + half, a[1] - half), (a[0] + half, a[1] + half))
    else:
        d = ((a[0] - half, a[1] + half), (a[0] + half, a[1] + half))
    return tuple(sorted((x + shift, y + shift) for x, y in d))


def pixel_norms(window: int) -> np.ndarray:
    """Doubled L-infinity norm of every pixel of the grid for ``Λ_window``."""
    c = np.abs(np.arange(-2 * window, 2 * window + 1))
    return np.maximum(c[:, None], c[None, :]).astype(np.int64)


@dataclass(frozen=True)
class ScaleLayout:
    """The two small boxes S and the two enclosing boxes Ŝ used at dyadic scale k."""

    k: int
    centers: tuple
    s_radius: int
    shat_radius: int

    @property
    def S1(self) -> Region:
        return _shifted_box(self.centers[0], self.s_radius)

    @property
    def S2(self) -> Region:
        return _shifted_box(self.centers[1], self.s_radius)

    @property
    def S1hat(self) -> Region:
        return _shifted_box(self.centers[0], self.shat_radius)

    @property
    def S2hat(self) -> Region:
        return _shifted_box(self.centers[1], self.shat_radius)


def _shifted_box(center, radius) -> Region:
    cx, cy = center
    return rectangle(2 * radius, 2 * radius, cx - radius, cy - radius)


def scale_layout(k: int) -> ScaleLayout:
    """Box layout of scale ``k``: centres at 2^k (-3/2, 0) and 2^k (3/2, 0)."""
    if k < MIN_SCALE:
        raise ScaleTooSmallError(f"scale index must be >= {MIN_SCALE}, got {k}")
    c = 3 * 2 ** (k - 1)
    s, shat = 2 ** k // 10, 2 ** k // 5
    lo, hi = 2 ** k, 2 ** (k + 1)
    for cx in (-c, c):
        # Ŝ must sit strictly inside the annulus in the x direction
        assert lo < abs(cx) - shat and abs(cx) + shat <= hi and shat < lo
        assert 1 <= s < shat
    return ScaleLayout(k, ((-c, 0), (c, 0)), s, shat)

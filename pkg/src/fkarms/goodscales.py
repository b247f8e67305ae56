"""Good scales, the in-series condition and the event D(K).

Scale k is the annulus Ann(2^k, 2^{k+1}).  It is good when the inner flower
domains between Ŝ^i_k and S^i_k (i = 1 west, i = 2 east) both have four
well-separated petals and four clusters link them in the annulus with both
domains removed:

* C^in: primal, joins P1 of both domains and touches the inner boundary;
* C^out: primal, joins P3 of both domains and touches the outer boundary;
* C^in*: dual, joins P2 of the west domain to P4 of the east one, inner boundary;
* C^out*: dual, joins P4 of the west domain to P2 of the east one, outer boundary.

Petals are numbered counterclockwise starting from the primal petal whose
angular midpoint faces the origin (east for the west box, west for the east
box).  A primal cluster touches ∂Λ_n when it holds a vertex of norm n; a dual
cluster touches it when it holds a dual vertex adjacent to ∂Λ_n from inside
the annulus (doubled norm 2n+1 on the inner side, 2n-1 on the outer side).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ScaleTooSmallError
from .interfaces import (INNER, FlowerDomain, color_components, flower_domain_from_image,
                         is_well_separated, path_length)
from .lattice import MIN_SCALE, scale_layout
from .rcmodel import EdgeConfig

CLUSTERS = ("in", "out", "in_dual", "out_dual")
# (petal index on the west box, petal index on the east box, colour, boundary side)
LINKS = {
    "in": (1, 1, 1, "inner"),
    "out": (3, 3, 1, "outer"),
    "in_dual": (2, 4, 0, "inner"),
    "out_dual": (4, 2, 0, "outer"),
}


def _window(img) -> int:
    return (img.shape[0] - 1) // 4


def _image(config) -> np.ndarray:
    if isinstance(config, EdgeConfig):
        return config.to_pixels()
    return np.asarray(config, dtype=np.uint8)


def boundary_norm(n: int, color: int, side: str) -> int:
    """Doubled norm of the pixels through which a cluster touches ∂Λ_n."""
    if color == 1:
        return 2 * n
    return 2 * n + 1 if side == "inner" else 2 * n - 1


def _angle(pt, center) -> float:
    return math.atan2(pt[1] - center[1], pt[0] - center[0])


def petal_midangle(petal, center) -> float:
    """Angle of the counterclockwise midpoint between a petal's endpoints."""
    a = _angle(petal.endpoints[0], center)
    b = _angle(petal.endpoints[1], center)
    span = (b - a) % (2 * math.pi)
    return a + span / 2


def label_petals(fd: FlowerDomain, facing: float) -> list:
    """Indices of the petals in the order P1..P4.

    P1 is the primal petal whose midpoint direction is closest to ``facing``
    (an angle); the others follow counterclockwise.
    """
    prim = [i for i, p in enumerate(fd.petals) if p.parity == 1]

    def gap(i):
        d = (petal_midangle(fd.petals[i], fd.center) - facing) % (2 * math.pi)
        return min(d, 2 * math.pi - d)

    first = min(prim, key=gap)
    n = fd.n_petals
    return [(first + t) % n for t in range(n)]


@dataclass
class GoodScaleCertificate:
    """Witness that scale k is good.

    ``order[i]`` lists petal indices of ``domains[i]`` in the order P1..P4.
    ``seeds`` holds one global pixel of each linking cluster and
    ``witness_lengths`` the pixel length of a shortest path joining the two
    petals inside that cluster.
    """

    k: int
    domains: tuple
    order: tuple
    seeds: dict
    witness_lengths: dict = field(default_factory=dict)

    def petal(self, i: int, j: int):
        """Petal P_j of box i (both 1-based)."""
        return self.domains[i - 1].petals[self.order[i - 1][j - 1]]

    def summary(self) -> dict:
        return {
            "k": self.k,
            "petals": [[{"parity": self.petal(i, j).parity,
                         "endpoints": self.petal(i, j).endpoints} for j in range(1, 5)]
                       for i in (1, 2)],
            "witness_lengths": dict(self.witness_lengths),
        }


def _global_mask(fd: FlowerDomain, mask, shape):
    return fd.global_mask(shape, mask)


def classify_scale(config, k: int) -> GoodScaleCertificate | None:
    """Certificate if scale ``k`` is good, else ``None``.

    ``config`` is an EdgeConfig or its pixel image; it must cover Λ_{2^{k+1}}.
    """
    if k < MIN_SCALE:
        raise ScaleTooSmallError(f"scale index must be >= {MIN_SCALE}, got {k}")
    img = _image(config)
    N = _window(img)
    lo, hi = 2 ** k, 2 ** (k + 1)
    if N < hi:
        raise ParameterError(f"configuration window {N} does not cover scale {k}")
    lay = scale_layout(k)
    domains, orders = [], []
    for center, facing in zip(lay.centers, (0.0, math.pi)):
        fd = flower_domain_from_image(img, lay.s_radius, lay.shat_radius, INNER, center)
        if fd.n_petals != 4 or not is_well_separated(fd):
            return None
        domains.append(fd)
        orders.append(label_petals(fd, facing))

    # annulus crop, in global pixel coordinates offset by o
    o = 2 * N - 2 * hi
    sub = np.ascontiguousarray(img[o:o + 4 * hi + 1, o:o + 4 * hi + 1])
    m = sub.shape[0]
    I, J = np.indices((m, m))
    nrm = np.maximum(np.abs(I - 2 * hi), np.abs(J - 2 * hi))
    allowed = (nrm >= 2 * lo) & (nrm <= 2 * hi)
    pmasks = {}
    for i, fd in enumerate(domains):
        dm = _global_mask(fd, fd.domain, img.shape)[o:o + m, o:o + m]
        allowed &= ~dm
        for j in range(4):
            pm = _global_mask(fd, fd.petals[orders[i][j]].mask, img.shape)[o:o + m, o:o + m]
            pmasks[(i + 1, j + 1)] = pm & allowed
    allowed_u8 = allowed.astype(np.uint8)
    lab, _ = color_components(sub, allowed_u8)
    seeds, lengths = {}, {}
    for name, (pw, pe, color, side) in LINKS.items():
        a, b = pmasks[(1, pw)], pmasks[(2, pe)]
        ring = nrm == boundary_norm(lo if side == "inner" else hi, color, side)
        la = set(np.unique(lab[a & (sub == color)])) - {0}
        lb = set(np.unique(lab[b & (sub == color)])) - {0}
        lr = set(np.unique(lab[ring & allowed & (sub == color)])) - {0}
        common = sorted(la & lb & lr)
        if not common:
            return None
        ell = common[0]
        inside = lab == ell
        si, sj = np.argwhere(a & inside)[0]
        seeds[name] = (int(si + o), int(sj + o))
        lengths[name] = int(path_length(sub, inside.astype(np.uint8),
                                        a & inside, b & inside))
    return GoodScaleCertificate(k, tuple(domains), tuple(orders), seeds, lengths)


@dataclass
class SeriesRecord:
    """Largest set of good scales in series and the connections that hold.

    ``primal_links[j]`` / ``dual_links[j]`` record the link between the j-th and
    (j+1)-th scale; ``ends`` records the four connections to ∂Λ_{2^m} and
    ∂Λ_{2^n}.  ``count`` is the number of scales in series.
    """

    m: int
    n: int
    scales: tuple = ()
    primal_links: tuple = ()
    dual_links: tuple = ()
    ends: dict = field(default_factory=dict)
    good: tuple = ()

    @property
    def count(self) -> int:
        return len(self.scales)

    def holds(self, K: int) -> bool:
        """Whether D(K) occurs."""
        return self.count >= K

    def to_record(self) -> dict:
        return {"m": self.m, "n": self.n, "scales": list(self.scales),
                "primal_links": list(self.primal_links), "dual_links": list(self.dual_links),
                "ends": dict(self.ends), "good": list(self.good), "count": self.count}


def _series_check(sub, o, nrm, m, n, subset, certs, shape):
    allowed = (nrm >= 2 * 2 ** m) & (nrm <= 2 * 2 ** n)
    size = sub.shape[0]
    for k in subset:
        for fd in certs[k].domains:
            allowed &= ~fd.global_mask(shape, fd.domain)[o:o + size, o:o + size]
    lab, _ = color_components(sub, allowed.astype(np.uint8))

    def at(seed):
        return lab[seed[0] - o, seed[1] - o]

    def touches(ell, color, radius, side):
        ring = (nrm == boundary_norm(radius, color, side)) & allowed & (sub == color)
        return bool(np.any(lab[ring] == ell))

    plinks, dlinks = [], []
    for a, b in zip(subset, subset[1:]):
        plinks.append(bool(at(certs[a].seeds["out"]) == at(certs[b].seeds["in"])))
        dlinks.append(bool(at(certs[a].seeds["out_dual"]) == at(certs[b].seeds["in_dual"])))
    first, last = certs[subset[0]], certs[subset[-1]]
    ends = {
        "in_primal": touches(at(first.seeds["in"]), 1, 2 ** m, "inner"),
        "out_primal": touches(at(last.seeds["out"]), 1, 2 ** n, "outer"),
        "in_dual": touches(at(first.seeds["in_dual"]), 0, 2 ** m, "inner"),
        "out_dual": touches(at(last.seeds["out_dual"]), 0, 2 ** n, "outer"),
    }
    ok = all(plinks) and all(dlinks) and all(ends.values())
    return ok, tuple(plinks), tuple(dlinks), ends


def series_and_count(config, m: int, n: int, certs) -> SeriesRecord:
    """Largest subset of the good scales that is in series.

    ``certs`` maps scale index to a certificate (or ``None``), or is a list of
    certificates/``None`` for scales m..n-1.
    """
    if isinstance(certs, (list, tuple)):
        certs = {m + i: c for i, c in enumerate(certs)}
    good = tuple(sorted(k for k, c in certs.items() if c is not None and m <= k < n))
    if not good:
        return SeriesRecord(m, n)
    img = _image(config)
    N = _window(img)
    if N < 2 ** n:
        raise ParameterError(f"configuration window {N} does not cover Λ_{2 ** n}")
    o = 2 * N - 2 * 2 ** n
    sub = np.ascontiguousarray(img[o:o + 4 * 2 ** n + 1, o:o + 4 * 2 ** n + 1])
    size = sub.shape[0]
    I, J = np.indices((size, size))
    c = 2 * 2 ** n
    nrm = np.maximum(np.abs(I - c), np.abs(J - c))
    for size_k in range(len(good), 0, -1):
        for subset in itertools.combinations(good, size_k):
            ok, pl, dl, ends = _series_check(sub, o, nrm, m, n, subset, certs, img.shape)
            if ok:
                return SeriesRecord(m, n, subset, pl, dl, ends, good)
    return SeriesRecord(m, n, good=good)


def good_scale_count(config, m: int, n: int) -> tuple:
    """Classify every scale m..n-1 and return (certificates, series record)."""
    img = _image(config)
    certs = {k: classify_scale(img, k) for k in range(m, n)}
    return certs, series_and_count(img, m, n, certs)

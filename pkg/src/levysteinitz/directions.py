"""Divergence directions on the unit sphere: vanishing check and estimator.

Divergence is not decidable from a finite prefix, so the estimator is a
heuristic: it buckets normalised terms on a deterministic net of the sphere
and reports clusters whose accumulated norm exceeds a threshold.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .geometry import Subspace
from .series import TermStream

DEFAULT_N = 100_000
DEFAULT_THRESHOLD = 5.0
DEFAULT_RADIUS = 0.1
NONVANISHING_FLOOR = 0.1
CHUNK = 65536


class VanishStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass
class VanishVerdict:
    status: VanishStatus
    max_tail: float
    heavy_count: int = 0
    witness: Optional[np.ndarray] = None

    def __bool__(self):
        return self.status is VanishStatus.PASS


@dataclass
class DirectionEntry:
    direction: np.ndarray
    mass: float
    radius: float


@dataclass
class DirectionReport:
    directions: list
    terms_vanish: Optional[VanishVerdict]
    source: str
    buckets: dict = field(default_factory=dict, repr=False)

    def vectors(self) -> np.ndarray:
        if not self.directions:
            return np.zeros((0, 0))
        return np.array([e.direction for e in self.directions])


def _prefix_chunks(stream: TermStream, N: int, space: Optional[Subspace]):
    proj = None if space is None or space.dim == stream.dim else space.projector()
    for start in range(1, N + 1, CHUNK):
        stop = min(N + 1, start + CHUNK)
        x = stream.term_range(start, stop)
        if proj is not None:
            x = x @ proj
        yield start, x


def check_terms_vanish(stream: TermStream, N: int, eps: float,
                       floor: float = NONVANISHING_FLOOR,
                       space: Optional[Subspace] = None) -> VanishVerdict:
    """Pass when the second half of the prefix has all norms below ``eps``.

    Fails when at least N/10 prefix terms have norm ``>= floor``; the
    witness is the mean direction of those heavy terms.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    half = N // 2
    tail = 0.0
    heavy = 0
    heavy_sum = None
    for start, x in _prefix_chunks(stream, N, space):
        norms = np.linalg.norm(x, axis=1)
        big = norms >= floor
        heavy += int(np.count_nonzero(big))
        if np.any(big):
            s = (x[big] / norms[big, None]).sum(axis=0)
            heavy_sum = s if heavy_sum is None else heavy_sum + s
        hi = start + x.shape[0] - 1
        if hi > half:
            lo = max(0, half + 1 - start)
            tail = max(tail, float(norms[lo:].max()))
    if tail < eps:
        return VanishVerdict(VanishStatus.PASS, tail, heavy)
    if heavy >= N / 10:
        w = None
        if heavy_sum is not None and np.linalg.norm(heavy_sum) > 0:
            w = heavy_sum / np.linalg.norm(heavy_sum)
        return VanishVerdict(VanishStatus.FAIL, tail, heavy, w)
    return VanishVerdict(VanishStatus.INCONCLUSIVE, tail, heavy)


class SphereNet:
    """Deterministic rho-net of the unit sphere S^{d-1} with adjacency.

    Every point of the sphere lies within ``rho`` of its bucket centre.
    d = 1: the two points +-1.  d = 2, 3: recursive subdivision of the
    square / octahedron, projected to the sphere.  d > 3: grid points of the
    lattice ``h Z^d`` normalised, created lazily as terms land near them.
    """

    def __init__(self, d: int, rho: float):
        if not 0 < rho < 1:
            raise ValueError("bucket radius must lie in (0, 1)")
        self.d = d
        self.rho = rho
        self.lazy = d > 3
        if d == 1:
            self.points = np.array([[1.0], [-1.0]])
            self.edges = set()
        elif d == 2:
            self._circle()
        elif d == 3:
            self._octahedron()
        else:
            self.h = 2 * rho / np.sqrt(d)
            self.points = None
            self.edges = None

    def _circle(self):
        pts = [np.array(p, dtype=float) for p in ((1, 0), (0, 1), (-1, 0), (0, -1))]
        while max(np.linalg.norm(pts[i] - pts[(i + 1) % len(pts)]) for i in range(len(pts))) >= 2 * self.rho:
            nxt = []
            for i, p in enumerate(pts):
                q = pts[(i + 1) % len(pts)]
                m = p + q
                nxt += [p, m / np.linalg.norm(m)]
            pts = nxt
        self.points = np.array(pts)
        n = len(pts)
        self.edges = {(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)}

    def _octahedron(self):
        verts = [np.array(v, dtype=float) for v in
                 ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))]
        faces = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
                 (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]

        def longest():
            return max(np.linalg.norm(verts[a] - verts[b])
                       for f in faces for a, b in ((f[0], f[1]), (f[1], f[2]), (f[0], f[2])))

        while longest() >= np.sqrt(3) * self.rho:
            cache = {}

            def mid(a, b):
                key = (min(a, b), max(a, b))
                if key not in cache:
                    m = verts[a] + verts[b]
                    verts.append(m / np.linalg.norm(m))
                    cache[key] = len(verts) - 1
                return cache[key]

            new = []
            for a, b, c in faces:
                ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
                new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
            faces = new
        self.points = np.array(verts)
        self.edges = set()
        for a, b, c in faces:
            for u, v in ((a, b), (b, c), (a, c)):
                self.edges.add((min(u, v), max(u, v)))

    def assign(self, units: np.ndarray):
        """Bucket key for each unit vector."""
        if self.lazy:
            return [tuple(k) for k in np.rint(units / self.h).astype(np.int64)]
        return np.argmax(units @ self.points.T, axis=1)

    def centre(self, key) -> np.ndarray:
        if self.lazy:
            v = np.array(key, dtype=float)
            return v / np.linalg.norm(v)
        return self.points[key]

    def adjacent(self, a, b) -> bool:
        if self.lazy:
            return max(abs(x - y) for x, y in zip(a, b)) <= 1
        return (min(a, b), max(a, b)) in self.edges


def estimate_divergence_directions(stream: TermStream, N: int = DEFAULT_N,
                                   rho: float = DEFAULT_RADIUS,
                                   M: float = DEFAULT_THRESHOLD,
                                   space: Optional[Subspace] = None,
                                   use_certificate: bool = True,
                                   vanish_eps: float = 1e-3) -> DirectionReport:
    """Clusters of sphere buckets whose accumulated ``sum ||x_n||`` exceeds ``M``.

    With ``space`` the estimate runs on the projected series ``pr_space x_n``.
    A certificate on the stream, when present, is returned verbatim.
    """
    if N < 1 or M <= 0:
        raise ValueError("need N >= 1 and M > 0")
    vanish = check_terms_vanish(stream, N, vanish_eps, space=space)
    if use_certificate:
        cert = stream.certificate_on(space) if space is not None else stream.certificate
        if cert is not None:
            entries = [DirectionEntry(u.copy(), float("inf"), 0.0) for u in cert.divergence_directions]
            return DirectionReport(entries, vanish, "certificate")

    net = SphereNet(stream.dim, rho)
    mass = defaultdict(float)
    weighted = defaultdict(lambda: np.zeros(stream.dim))
    for _, x in _prefix_chunks(stream, N, space):
        norms = np.linalg.norm(x, axis=1)
        keep = norms > 0
        x, norms = x[keep], norms[keep]
        if x.shape[0] == 0:
            continue
        units = x / norms[:, None]
        keys = net.assign(units)
        if net.lazy:
            for k, u, w in zip(keys, units, norms):
                mass[k] += w
                weighted[k] += w * u
        else:
            for k in np.unique(keys):
                sel = keys == k
                mass[int(k)] += float(norms[sel].sum())
                weighted[int(k)] += units[sel].T @ norms[sel]

    heavy = sorted(k for k, m in mass.items() if m > M)
    seen = set()
    entries = []
    for k in heavy:
        if k in seen:
            continue
        comp, stack = [], [k]
        seen.add(k)
        while stack:
            a = stack.pop()
            comp.append(a)
            for b in heavy:
                if b not in seen and net.adjacent(a, b):
                    seen.add(b)
                    stack.append(b)
        total = sum(mass[a] for a in comp)
        vec = sum(weighted[a] for a in comp)
        entries.append(DirectionEntry(vec / np.linalg.norm(vec), total, rho))
    return DirectionReport(entries, vanish, "estimated", dict(mass))

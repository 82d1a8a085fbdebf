"""A null sequence on the torus T^2 whose series cannot be rearranged to
converge, although every character maps it to a rearrangeable circle series.

Terms are planar vectors ``z_n`` grouped in blocks; ``x_n`` is ``z_n`` mod 1.
Every ``z_n`` lies in the open half-plane ``f > 0`` for the irrational
functional ``f = (1, sqrt 2)`` and ``sum f(z_n)`` diverges, so no ordering of
``sum z_n`` (hence of ``sum x_n``) converges.  Block ``m`` also carries, for
each character ``k <= m``, one packet of positive and one of negative
``f_k``-mass at least 1, which makes each scalar series ``sum f_k(z_n)``
conditionally convergent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import AssertionFailed, BadParams
from .scalar import ScalarSeries, Verdict, classify_scalar, riemann_rearrange

F_DEFAULT = (1.0, math.sqrt(2.0))
DECAY = 3


@dataclass(frozen=True)
class TorusPoint:
    """Point of T^2 = R^2 / Z^2 with coordinates reduced to [0, 1)."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _frac(self.x))
        object.__setattr__(self, "y", _frac(self.y))

    @classmethod
    def from_plane(cls, v) -> "TorusPoint":
        return cls(float(v[0]), float(v[1]))

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint(self.x + other.x, self.y + other.y)

    def __neg__(self) -> "TorusPoint":
        return TorusPoint(-self.x, -self.y)

    def __sub__(self, other: "TorusPoint") -> "TorusPoint":
        return self + (-other)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _frac(t: float) -> float:
    r = t - math.floor(t)
    return 0.0 if r >= 1.0 else r


def circle_dist(s, t):
    """Distance on T = R / Z."""
    d = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def torus_metric(p, q) -> float:
    """Flat metric on T^2: coordinatewise wrapped differences, Euclidean norm."""
    p = p.as_array() if isinstance(p, TorusPoint) else np.asarray(p, dtype=float)
    q = q.as_array() if isinstance(q, TorusPoint) else np.asarray(q, dtype=float)
    return float(np.linalg.norm(circle_dist(p, q)))


@dataclass(frozen=True)
class Character:
    """Character ``(x, y) -> a x + b y mod 1`` of T^2; ``index`` is its
    position in :func:`enumerate_characters`."""

    a: int
    b: int
    index: int = -1

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise BadParams("the trivial character is excluded")

    @property
    def vector(self) -> np.ndarray:
        return np.array([float(self.a), float(self.b)])

    def lift(self, v) -> np.ndarray:
        """The linear functional on R^2 covering this character."""
        return np.asarray(v, dtype=float) @ self.vector

    def __call__(self, p) -> float:
        """Value in [0, 1) at a torus point."""
        p = p if isinstance(p, TorusPoint) else TorusPoint(*p)
        return _frac(self.a * p.x + self.b * p.y)


def enumerate_characters(count: int) -> list:
    """First ``count`` nonzero integer pairs, ring by ring in ``max(|a|,|b|)``,
    each ring counterclockwise starting at ``(r, 0)``."""
    if count < 1:
        raise BadParams("count must be >= 1")
    out = []
    r = 1
    while len(out) < count:
        ring = [(a, b) for a in range(-r, r + 1) for b in range(-r, r + 1) if max(abs(a), abs(b)) == r]
        ring.sort(key=lambda p: math.atan2(p[1], p[0]) % (2 * math.pi))
        for a, b in ring:
            out.append(Character(a, b, len(out)))
            if len(out) == count:
                break
        r += 1
    return out


def character_at(k: int) -> Character:
    return enumerate_characters(k + 1)[k]


def cone_bisector(f, g, sign: int) -> np.ndarray:
    """Unit vector bisecting the open cone ``{f > 0, sign * g > 0}``."""
    f = np.asarray(f, dtype=float)
    g = sign * np.asarray(g, dtype=float)
    r1 = np.array([-f[1], f[0]])
    if r1 @ g < 0:
        r1 = -r1
    r2 = np.array([-g[1], g[0]])
    if r2 @ f < 0:
        r2 = -r2
    u = r1 / np.linalg.norm(r1) + r2 / np.linalg.norm(r2)
    return u / np.linalg.norm(u)


@dataclass
class Packet:
    """``count`` copies of ``vector`` occupying indices ``start .. start+count-1``.

    ``k`` is the served character (``None`` for the f-mass packet), ``sign``
    the sign of its functional on the packet.
    """

    block: int
    k: Optional[int]
    sign: int
    vector: np.ndarray
    count: int
    start: int = 0

    @property
    def purpose(self) -> str:
        if self.k is None:
            return "f"
        return f"char{self.k}{'+' if self.sign > 0 else '-'}"


def _nudged(u: np.ndarray, cap: float) -> np.ndarray:
    v = u * cap
    while np.linalg.norm(v) > cap:
        v = np.nextafter(v, 0.0)
    return v


def _packet(block: int, k, sign: int, u, functional, cap: float) -> Packet:
    v = _nudged(u, cap)
    per = abs(float(v @ functional))
    count = max(1, math.ceil(1.0 / per))
    while count * per < 1.0 or abs(float(np.full(count, v @ functional).sum())) < 1.0:
        count += 1
    return Packet(block, k, sign, v, count)


class TorusCounterexample:
    """Block construction of the planar sequence ``z_n`` (built lazily).

    Block ``m`` holds, for ``k = 0 .. m`` and both signs, a packet of copies
    of ``cap * u`` with ``u`` the bisector of ``{f > 0, s f_k > 0}`` and
    ``cap = 1 / m**decay``, then one packet along ``f`` of f-mass at least 1.
    """

    def __init__(self, num_blocks: int, f=F_DEFAULT, decay: int = DECAY):
        if num_blocks < 1:
            raise BadParams("need at least one block")
        self.f = np.asarray(f, dtype=float)
        self.decay = decay
        self.num_blocks = 0
        self.blocks = []
        self.packets = []
        self._size = 0
        self._terms = np.zeros((0, 2))
        self._block_of = np.zeros(0, dtype=np.int64)
        self.characters = []
        self.extend(num_blocks)
        self.built_terms = self._size

    def _make_block(self, m: int) -> list:
        cap = 1.0 / m ** self.decay
        if len(self.characters) < m + 1:
            self.characters = enumerate_characters(m + 1)
        out = []
        for k in range(m + 1):
            g = self.characters[k].vector
            for s in (1, -1):
                out.append(_packet(m, k, s, cone_bisector(self.f, g, s), g, cap))
        out.append(_packet(m, None, 1, self.f / np.linalg.norm(self.f), self.f, cap))
        return out

    def extend(self, upto: int):
        """Build blocks up to ``upto`` (inclusive)."""
        new_vecs, new_blocks = [], []
        while self.num_blocks < upto:
            m = self.num_blocks + 1
            block = self._make_block(m)
            for p in block:
                p.start = self._size + 1
                self._size += p.count
                new_vecs.append(np.tile(p.vector, (p.count, 1)))
                new_blocks.append(np.full(p.count, m, dtype=np.int64))
            self.blocks.append(block)
            self.packets += block
            self.num_blocks = m
        if new_vecs:
            self._terms = np.vstack([self._terms] + new_vecs)
            self._block_of = np.concatenate([self._block_of] + new_blocks)

    def __len__(self) -> int:
        return self._size

    def ensure(self, n: int):
        while self._size < n:
            self.extend(self.num_blocks + 1)

    def terms(self, idx) -> np.ndarray:
        """Planar vectors ``z_n`` for 1-based indices."""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size:
            self.ensure(int(idx.max()))
        return self._terms[idx - 1]

    def block_of(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size:
            self.ensure(int(idx.max()))
        return self._block_of[idx - 1]

    def points(self, idx) -> list:
        """Torus points ``x_n``."""
        return [TorusPoint.from_plane(v) for v in self.terms(idx)]

    def character_series(self, k: int) -> ScalarSeries:
        """The real series ``f_k(z_n)``; conditionally convergent by construction."""
        g = self.character(k)
        return ScalarSeries(lambda n: self.terms(n) @ g.vector, "any",
                            f"lift of character ({g.a},{g.b}) on torus terms")

    def character(self, k: int) -> Character:
        if k < 0:
            raise BadParams("character index must be >= 0")
        if len(self.characters) <= k:
            self.characters = enumerate_characters(k + 1)
        return self.characters[k]

    def without(self, packet_pos: int) -> "TorusCounterexample":
        """Copy of the built prefix with one packet removed (for negative tests)."""
        drop = self.packets[packet_pos]
        clone = TorusCounterexample(1, self.f, self.decay)
        clone.blocks, clone.packets = [], []
        clone._size, clone.num_blocks = 0, 0
        vecs, blks = [], []
        for block in self.blocks:
            kept = []
            for p in block:
                if p is drop:
                    continue
                q = Packet(p.block, p.k, p.sign, p.vector, p.count, clone._size + 1)
                clone._size += q.count
                vecs.append(np.tile(q.vector, (q.count, 1)))
                blks.append(np.full(q.count, q.block, dtype=np.int64))
                kept.append(q)
            clone.blocks.append(kept)
            clone.packets += kept
        clone.num_blocks = self.num_blocks
        clone.characters = list(self.characters)
        clone._terms = np.vstack(vecs)
        clone._block_of = np.concatenate(blks)
        clone.built_terms = clone._size
        return clone


def build_counterexample(num_blocks: int, f=F_DEFAULT, decay: int = DECAY) -> TorusCounterexample:
    return TorusCounterexample(num_blocks, f, decay)


@dataclass
class TorusReport:
    blocks: int
    terms: int
    max_norm_ratio: float
    f_sum: float
    pos_parts: dict
    neg_parts: dict
    verdicts: dict
    growth: list = field(default_factory=list)

    def table(self) -> str:
        lines = [f"{'block':>5} {'last index':>10} {'f partial':>12}"]
        for m, n, s in self.growth:
            lines.append(f"{m:>5} {n:>10} {s:>12.6f}")
        lines.append("")
        lines.append(f"{'k':>3} {'(a,b)':>8} {'pos part':>10} {'neg part':>10} {'need':>5}  verdict")
        for k in sorted(self.pos_parts):
            a, b = self._chars[k]
            lines.append(f"{k:>3} {f'({a},{b})':>8} {self.pos_parts[k]:>10.4f} "
                         f"{self.neg_parts[k]:>10.4f} {self.blocks - k:>5}  {self.verdicts[k]}")
        return "\n".join(lines)


def verify_counterexample(ce: TorusCounterexample, budget: Optional[int] = None) -> TorusReport:
    """Check the finite witnesses of the construction on the built prefix.

    Clauses: (a) ``||z_n|| <= 1/m`` in block m; (b) ``sum f(z_n) >= blocks``;
    (c) for every character ``k < blocks`` both signed parts of
    ``sum f_k(z_n)`` exceed ``blocks - k`` in magnitude and every block
    carries its two packets for k; (d) the prefix classifier calls each of
    those scalar series conditionally convergent.
    """
    M = ce.num_blocks
    if M < 3:
        raise BadParams("verification needs at least 3 blocks")
    N = ce.built_terms if budget is None else min(budget, ce.built_terms)
    idx = np.arange(1, N + 1)
    z = ce.terms(idx)
    blk = ce.block_of(idx)

    norms = np.linalg.norm(z, axis=1)
    ratio = float(np.max(norms * blk))
    if ratio > 1.0:
        bad = int(np.argmax(norms * blk)) + 1
        raise AssertionFailed("a", f"term {bad} has norm {norms[bad - 1]:.3g} > 1/{blk[bad - 1]}")
    fz = z @ ce.f
    if np.any(fz <= 0):
        raise AssertionFailed("a", f"term {int(np.argmax(fz <= 0)) + 1} leaves the half-plane f > 0")

    f_partial = np.cumsum(fz)
    growth = []
    for m in range(1, M + 1):
        last = int(np.searchsorted(blk, m, side="right"))
        if last:
            growth.append((m, last, float(f_partial[last - 1])))
    if f_partial[-1] < M:
        raise AssertionFailed("b", f"f partial sum {f_partial[-1]:.6g} below {M}")

    pos, neg, verdicts = {}, {}, {}
    for k in range(M):
        g = ce.character(k).vector
        vals = z @ g
        pos[k] = float(vals[vals > 0].sum())
        neg[k] = float(vals[vals < 0].sum())
        if pos[k] < M - k or -neg[k] < M - k:
            raise AssertionFailed("c", f"character {k}: signed parts {pos[k]:.4g}, {neg[k]:.4g} "
                                       f"do not reach {M - k}")
        for m in range(max(k, 1), M + 1):
            for s in (1, -1):
                mass = sum(p.count * float(p.vector @ g) for p in ce.blocks[m - 1]
                           if p.k == k and p.sign == s)
                if s * mass < 1.0:
                    raise AssertionFailed("c", f"block {m} lacks the {'+' if s > 0 else '-'} packet "
                                               f"of character {k}")
        series = ScalarSeries.from_array(vals)
        cls = classify_scalar(series, N=N, M=0.5 * (M - k))
        verdicts[k] = cls.verdict.value
        if cls.verdict is not Verdict.ANY_REAL:
            raise AssertionFailed("d", f"character {k}: prefix verdict {cls.verdict.value}")
    rep = TorusReport(M, N, ratio, float(f_partial[-1]), pos, neg, verdicts, growth)
    rep._chars = {k: (ce.character(k).a, ce.character(k).b) for k in range(M)}
    return rep


@dataclass
class CharacterTrace:
    k: int
    target: float
    steps: np.ndarray
    indices: np.ndarray
    lift_partial: np.ndarray
    mod1_partial: np.ndarray
    mod1_dist: np.ndarray
    f_partial_max: float

    def write_csv(self, fh):
        fh.write("step,emitted_index,lift_partial,mod1_partial,mod1_dist_to_target\n")
        for s, n, lp, mp, d in zip(self.steps, self.indices, self.lift_partial,
                                   self.mod1_partial, self.mod1_dist):
            fh.write(f"{int(s)},{int(n)},{float(lp)!r},{float(mp)!r},{float(d)!r}\n")


def character_rearrange(ce: TorusCounterexample, k: int, target: float,
                        budget: Optional[int] = None):
    """Riemann rearrangement of ``f_k(z_n)`` towards the real ``target``,
    read modulo 1.  Returns ``(stream, trace)``; the trace covers ``budget``
    emissions (default: the size of the built prefix)."""
    if not 0 <= target < 1:
        raise BadParams("target must lie in [0, 1)")
    if k >= max(ce.num_blocks, 1) + 1:
        raise BadParams(f"character {k} is not served by the built blocks")
    series = ce.character_series(k)
    stream = riemann_rearrange(series, target, classify_scalar(series, N=min(len(ce), 10_000)))
    n = ce.built_terms if budget is None else budget
    idx = np.fromiter((next(stream) for _ in range(n)), dtype=np.int64, count=n)
    z = ce.terms(idx)
    lift = np.cumsum(z @ ce.character(k).vector)
    mod1 = lift % 1.0
    dist = circle_dist(mod1, target)
    fmax = float(np.max(np.cumsum(z @ ce.f)))
    trace = CharacterTrace(k, float(target), np.arange(1, n + 1), idx, lift, mod1, dist, fmax)
    return stream, trace


def lifting_defect(ch: Character, samples: int = 1000, scale: float = 10.0, seed: int = 0) -> float:
    """Largest circle distance between ``q(lift(v))`` and ``ch(q^2(v))`` on random ``v``."""
    rng = np.random.default_rng(seed)
    v = rng.uniform(-scale, scale, size=(samples, 2))
    lhs = ch.lift(v) % 1.0
    rhs = np.array([ch(TorusPoint.from_plane(p)) for p in v])
    return float(np.max(circle_dist(lhs, rhs)))

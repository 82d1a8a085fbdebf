"""Steering with terms that point along a minimal simplex of divergence directions.

``SteeringContext`` holds the simplex ``D0`` and its constants; ``OmegaSelection``
lazily collects per-direction blocks of steering material; ``steer`` picks a
finite set of those terms whose sum lands within ``eps`` of a target in
``span(D0)`` while every sub-sum stays bounded.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .exceptions import BudgetExhausted, DegenerateContext, PoolExhausted, TargetOutsideX0
from .geometry import (
    ConvexWitness,
    Subspace,
    barycentric_coordinates,
    minimal_simplex_weights,
    simplex_inradius,
)

DEFAULT_SCAN_BUDGET = 100_000
CHUNK = 16384


@dataclass(frozen=True)
class SteeringContext:
    D0: np.ndarray
    zero_weights: np.ndarray
    X0: Subspace
    X1: Subspace
    delta: float
    C_delta: float
    C: float
    lin_map: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.D0.shape[0]

    @property
    def dim(self) -> int:
        return self.D0.shape[1]

    def cone_radius(self, eps: float, lam: float) -> float:
        """Cap radius used by one steer call (shrinks with ``eps / lam``)."""
        if lam <= 0:
            return self.delta
        return min(self.delta, eps / (2 * lam))

    def in_cone(self, zi: int, v, radius: Optional[float] = None) -> bool:
        r = self.delta if radius is None else radius
        n = np.linalg.norm(v)
        return n > 0 and np.linalg.norm(v / n - self.D0[zi]) < r

    def weights(self, x) -> np.ndarray:
        """Smallest nonnegative weights ``w`` with ``sum_z w_z z = x``."""
        if self.lin_map is None:
            return minimal_simplex_weights(self.D0, self.zero_weights, x)
        lin = self.lin_map[:, :-1] @ np.asarray(x, dtype=float)
        lam = max(0.0, float(np.max(-lin / self.zero_weights)))
        return np.clip(lam * self.zero_weights + lin, 0.0, None)

    def ball_inside_hull(self, samples: int = 200, seed: int = 0) -> bool:
        """Sampled check that the delta-ball of X0 lies in conv(D0)."""
        rng = np.random.default_rng(seed)
        basis = self.X0.basis
        for _ in range(samples):
            c = rng.standard_normal(basis.shape[0])
            p = self.delta * (c / np.linalg.norm(c)) @ basis
            try:
                barycentric_coordinates(self.D0, p)
            except Exception:
                return False
        return True

    def cones_disjoint(self, samples: int = 200, seed: int = 0) -> bool:
        """Sampled check that no unit vector sits in two caps of radius delta."""
        rng = np.random.default_rng(seed)
        for zi, z in enumerate(self.D0):
            for _ in range(samples):
                g = rng.standard_normal(self.dim)
                g -= g @ z * z
                g /= max(np.linalg.norm(g), 1e-300)
                theta = rng.uniform(0, 2 * np.arcsin(self.delta / 2))
                v = np.cos(theta) * z + np.sin(theta) * g
                hits = [j for j in range(self.size) if self.in_cone(j, v)]
                if hits != [zi]:
                    return False
        return True


def build_steering_context(witness: ConvexWitness, dim: Optional[int] = None,
                           outer: Optional[Subspace] = None) -> SteeringContext:
    """Constants for a minimal witness ``0 = sum t_z z``.

    ``delta = 0.9 * min(1/4, inradius, min pairwise distance / 2)``,
    ``C_delta = |D0| (1 + delta)`` and ``C = C_delta / delta``.  ``X1`` is the
    complement of ``span(D0)`` inside ``outer`` (the whole space by default).
    """
    D0 = np.atleast_2d(np.asarray(witness.points, dtype=float))
    d = D0.shape[1] if dim is None else dim
    if D0.shape[1] != d:
        raise DegenerateContext("witness dimension mismatch")
    if D0.shape[0] < 2:
        raise DegenerateContext("a steering simplex needs at least two directions")
    inr = simplex_inradius(D0)
    if inr < 1e-9:
        raise DegenerateContext(f"simplex inradius {inr:.3g} is too small")
    gaps = [np.linalg.norm(a - b) for i, a in enumerate(D0) for b in D0[i + 1:]]
    delta = 0.9 * min(0.25, inr, min(gaps) / 2)
    k = D0.shape[0]
    c_delta = k * (1 + delta)
    X0 = Subspace.span(D0, d)
    outer = Subspace.full(d) if outer is None else outer
    X1 = X0.complement_within(outer)
    lin_map = np.linalg.pinv(np.vstack([D0.T, np.ones(k)]))
    return SteeringContext(D0, np.asarray(witness.weights, dtype=float), X0, X1,
                           delta, c_delta, c_delta / delta, lin_map)


class LevelTerms:
    """Cache of projected terms ``pr_V x_n`` with their norms and units."""

    def __init__(self, stream, space: Optional[Subspace] = None):
        self.stream = stream
        self.space = space
        full = space is None or space.dim == stream.dim
        self._proj = None if full else space.projector()
        self.size = 0
        self.vec = np.zeros((0, stream.dim))
        self.norm = np.zeros(0)
        self.unit = np.zeros((0, stream.dim))

    def ensure(self, n: int):
        """Make terms ``1..n`` available."""
        if n <= self.size:
            return
        stop = max(n, self.size + CHUNK, 2 * self.size)
        x = self.stream.term_range(self.size + 1, stop + 1)
        if self._proj is not None:
            x = x @ self._proj
        nrm = np.linalg.norm(x, axis=1)
        safe = np.where(nrm > 0, nrm, 1.0)
        self.vec = np.vstack([self.vec, x])
        self.norm = np.concatenate([self.norm, nrm])
        self.unit = np.vstack([self.unit, x / safe[:, None]])
        self.size = stop

    def get(self, n: int) -> np.ndarray:
        self.ensure(n)
        return self.vec[n - 1]

    def norm_of(self, n: int) -> float:
        self.ensure(n)
        return float(self.norm[n - 1])


@dataclass
class OmegaBlock:
    k: int
    indices: tuple
    mass: float
    pr1_mass: float


def _norm(v) -> float:
    return math.sqrt(float(np.dot(v, v)))


class Batch:
    """Candidates handed to a cone fill; the consumer sets ``examined``."""

    __slots__ = ("idx", "vecs", "examined")

    def __init__(self, idx, vecs):
        self.idx = idx
        self.vecs = vecs
        self.examined = len(idx)


class ListPool:
    """Finite pool of ``(index, vector)`` pairs (mainly for tests)."""

    def __init__(self, indices: Iterable[int], vectors):
        idx = np.asarray(list(indices), dtype=np.int64)
        order = np.argsort(idx)
        self.idx = idx[order]
        self.vecs = np.atleast_2d(np.asarray(vectors, dtype=float))[order]
        self.used = np.zeros(self.idx.size, dtype=bool)

    def batches(self, zi: int, budget=None):
        live = ~self.used
        yield Batch(self.idx[live], self.vecs[live])

    def consume(self, indices):
        self.used |= np.isin(self.idx, np.asarray(list(indices), dtype=np.int64))


class _IntArray:
    """Append-only int64 array."""

    def __init__(self):
        self.data = np.zeros(64, dtype=np.int64)
        self.size = 0

    def extend(self, values):
        values = np.asarray(values, dtype=np.int64)
        need = self.size + values.size
        if need > self.data.size:
            self.data = np.concatenate([self.data, np.zeros(max(need, 2 * self.data.size) - self.data.size, dtype=np.int64)])
        self.data[self.size:need] = values
        self.size = need

    def __len__(self):
        return self.size

    def __getitem__(self, i):
        return self.data[:self.size][i]

    def tolist(self):
        return self.data[:self.size].tolist()


class OmegaSelection:
    """Lazily built steering material, one cursor per direction of ``D0``.

    Each direction ``z`` scans indices in increasing order and fills blocks
    ``F_k`` of unclaimed terms within ``2^-k`` of ``z`` with mass in
    ``(k, k+1)``.  Indices below ``decided_frontier`` have final membership.
    """

    def __init__(self, terms: LevelTerms, ctx: SteeringContext,
                 scan_budget: int = DEFAULT_SCAN_BUDGET):
        self.terms = terms
        self.ctx = ctx
        self.scan_budget = scan_budget
        m = ctx.size
        self.owner = np.full(0, -1, dtype=np.int32)
        self.used = np.zeros(0, dtype=bool)
        self.cursor = [1] * m
        self.k = [1] * m
        self._cur_start = [0] * m
        self._cur_sum = [0.0] * m
        self._cur_pr1 = [0.0] * m
        self.blocks = [[] for _ in range(m)]
        self.claimed = [_IntArray() for _ in range(m)]
        self._head = [0] * m
        self._pending = [deque() for _ in range(m)]
        self.pr1_mass = 0.0
        self.history = []
        self._bound = self.pr1_bound()
        self.max_bound_ratio = 0.0
        self._x1 = ctx.X1.projector() if ctx.X1.dim else None

    # -- bookkeeping -------------------------------------------------------

    def _grow(self, n: int):
        if n <= self.owner.size:
            return
        size = max(n, 2 * self.owner.size, CHUNK)
        self.owner = np.concatenate([self.owner, np.full(size - self.owner.size, -1, dtype=np.int32)])
        self.used = np.concatenate([self.used, np.zeros(size - self.used.size, dtype=bool)])

    def pr1_bound(self) -> float:
        """Analytic bound ``sum_z sum_{j<=k_z} (j+1)/2^j`` over the open blocks."""
        return sum(sum((j + 1) / 2 ** j for j in range(1, k + 1)) for k in self.k)

    @property
    def decided_frontier(self) -> int:
        return min(self.cursor)

    def indices(self) -> list:
        return sorted(n for c in self.claimed for n in c.tolist())

    def is_used(self, n: int) -> bool:
        return n <= self.used.size and bool(self.used[n - 1])

    def mark_used(self, indices):
        if len(indices) == 1:
            n = int(indices[0])
            self._grow(n)
            if self.owner[n - 1] < 0:
                raise ValueError("only Omega indices can be used for steering")
            self.used[n - 1] = True
            return
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size == 0:
            return
        self._grow(int(idx.max()))
        if np.any(self.owner[idx - 1] < 0):
            raise ValueError("only Omega indices can be used for steering")
        self.used[idx - 1] = True

    def consume(self, indices):
        self.mark_used(indices)
        for zi, pend in enumerate(self._pending):
            if pend:
                self._pending[zi] = deque(n for n in pend if not self.used[n - 1])

    # -- scanning ----------------------------------------------------------

    def advance(self, zi: int, until: Optional[int] = None, claims: Optional[int] = None,
                budget: Optional[int] = None) -> int:
        """Scan for direction ``zi`` chunk by chunk until its cursor passes
        ``until`` or at least ``claims`` new claims were made."""
        z = self.ctx.D0[zi]
        made = 0
        start_cursor = self.cursor[zi]
        while True:
            if until is not None and self.cursor[zi] > until:
                return made
            if claims is not None and made >= claims:
                return made
            if budget is not None and self.cursor[zi] - start_cursor >= budget:
                raise BudgetExhausted(
                    f"direction {zi}: no block progress within {budget} scanned indices")
            lo = self.cursor[zi]
            hi = lo + CHUNK
            if until is not None:
                hi = min(hi, until + 1)
            self.terms.ensure(hi - 1)
            self._grow(hi - 1)
            dist = np.linalg.norm(self.terms.unit[lo - 1:hi - 1] - z, axis=1)
            free = self.owner[lo - 1:hi - 1] < 0
            made += self._fill(zi, lo, dist, free)
            self.cursor[zi] = hi

    def _fill(self, zi: int, lo: int, dist, free) -> int:
        """Claim, in index order, every term of the chunk that fits the open block."""
        made = 0
        pos = 0
        norms = self.terms.norm
        while pos < dist.size:
            k = self.k[zi]
            near = np.flatnonzero((dist[pos:] < 2.0 ** -k) & free[pos:]) + pos
            if near.size == 0:
                return made
            w = norms[lo - 1 + near]
            cs = self._cur_sum[zi] + np.cumsum(w)
            over = np.flatnonzero(cs > k)
            if over.size == 0:
                self._claim(zi, lo + near, w)
                return made + near.size
            t = int(over[0])
            if cs[t] >= k + 1:
                # the term would overflow the block: claim the run before it, skip it
                if t:
                    self._claim(zi, lo + near[:t], w[:t])
                    made += t
                pos = int(near[t]) + 1
                continue
            self._claim(zi, lo + near[:t + 1], w[:t + 1])
            made += t + 1
            self._close_block(zi)
            pos = int(near[t]) + 1
        return made

    def _claim(self, zi: int, ns, ws):
        ns = np.asarray(ns, dtype=np.int64)
        self.owner[ns - 1] = zi
        self.claimed[zi].extend(ns)
        self._cur_sum[zi] += float(np.sum(ws))
        if self._x1 is not None:
            p1 = float(np.linalg.norm(self.terms.vec[ns - 1] @ self._x1, axis=1).sum())
            self._cur_pr1[zi] += p1
            self.pr1_mass += p1
        self.max_bound_ratio = max(self.max_bound_ratio, self.pr1_mass / self._bound)

    def _close_block(self, zi: int):
        start = self._cur_start[zi]
        idx = tuple(self.claimed[zi][start:].tolist())
        self.blocks[zi].append(OmegaBlock(self.k[zi], idx, self._cur_sum[zi], self._cur_pr1[zi]))
        self.k[zi] += 1
        self._cur_start[zi] = len(self.claimed[zi])
        self._cur_sum[zi], self._cur_pr1[zi] = 0.0, 0.0
        self._bound = self.pr1_bound()
        self.history.append((idx[-1], self.pr1_mass, self._bound))

    def ensure_decided(self, n: int):
        """Fix Omega membership of every index ``<= n``."""
        for zi in range(self.ctx.size):
            if self.cursor[zi] <= n:
                self.advance(zi, until=n)

    def contains(self, n: int) -> bool:
        self.ensure_decided(n)
        return bool(self.owner[n - 1] >= 0)

    def build_blocks(self, kmax: int):
        """Complete blocks ``F_1 .. F_kmax`` for every direction."""
        for zi in range(self.ctx.size):
            start = self.cursor[zi]
            while self.k[zi] <= kmax:
                if self.cursor[zi] - start >= self.scan_budget:
                    raise BudgetExhausted(
                        f"block k={self.k[zi]} for direction {zi} not filled within "
                        f"{self.scan_budget} indices")
                self.advance(zi, until=self.cursor[zi] + 1023)

    # -- pools -------------------------------------------------------------

    def _first_unused(self, zi: int, budget: int) -> Optional[int]:
        pend = self._pending[zi]
        while pend and self.used[pend[0] - 1]:
            pend.popleft()
        if pend:
            return pend[0]
        claimed = self.claimed[zi]
        while True:
            data = claimed.data
            h = self._head[zi]
            while h < claimed.size and self.used[data[h] - 1]:
                h += 1
            self._head[zi] = h
            if h < claimed.size:
                return int(data[h])
            try:
                self.advance(zi, claims=1, budget=budget)
            except BudgetExhausted:
                return None

    def min_unused(self) -> int:
        """Smallest Omega index not yet used (membership fully decided)."""
        while True:
            heads = [self._first_unused(zi, self.scan_budget) for zi in range(self.ctx.size)]
            heads = [h for h in heads if h is not None]
            if not heads:
                raise PoolExhausted("Omega has no unused element within the scan budget")
            m = min(heads)
            if m < self.decided_frontier:
                return m
            self.ensure_decided(m)

    def head_norm(self, zi: int) -> float:
        n = self._first_unused(zi, self.scan_budget)
        if n is None:
            raise PoolExhausted(f"direction {zi} has no unused steering terms")
        return self.terms.norm_of(n)

    def batches(self, zi: int, budget: Optional[int] = None, cap: Optional[int] = None):
        """Unused Omega_z terms in increasing index order, in growing batches.

        Terms a consumer examined but did not take stay available (pending).
        ``budget`` bounds a scan without new claims; ``cap`` optionally bounds
        the total scan of this call.
        """
        budget = self.scan_budget if budget is None else budget
        pend = self._pending[zi]
        if pend:
            idx = np.fromiter((n for n in pend if not self.used[n - 1]), dtype=np.int64)
            if idx.size:
                yield Batch(idx, self.terms.vec[idx - 1])
        claimed = self.claimed[zi]
        size = 64
        scan_stop = None if cap is None else self.cursor[zi] + cap
        while True:
            h = self._head[zi]
            if h >= claimed.size:
                room = budget if scan_stop is None else min(budget, scan_stop - self.cursor[zi])
                if room <= 0:
                    return
                try:
                    self.advance(zi, claims=1, budget=room)
                except BudgetExhausted:
                    return
                continue
            hi = min(claimed.size, h + size)
            idx = claimed.data[h:hi]
            idx = idx[~self.used[idx - 1]]
            if idx.size == 0:
                self._head[zi] = hi
                continue
            batch = Batch(idx.copy(), self.terms.vec[idx - 1])
            yield batch
            done = batch.examined
            pend.extend(batch.idx[:done].tolist())
            if done < idx.size:
                # resume right after the last examined candidate
                self._head[zi] = int(np.searchsorted(claimed.data[:claimed.size], batch.idx[done]))
                return
            self._head[zi] = hi
            size = min(2 * size, CHUNK)


def build_omega(stream, ctx: SteeringContext, schedule: int = 3,
                space: Optional[Subspace] = None,
                scan_budget: int = DEFAULT_SCAN_BUDGET) -> OmegaSelection:
    """Omega selection with blocks ``F_1..F_schedule`` completed for every z."""
    terms = stream if isinstance(stream, LevelTerms) else LevelTerms(stream, space)
    omega = OmegaSelection(terms, ctx, scan_budget)
    omega.build_blocks(schedule)
    return omega


def _as_batches(pool):
    """Accept either Batch objects or plain ``(index, vector)`` pairs."""
    for item in pool:
        if isinstance(item, Batch):
            yield item
        else:
            n, v = item
            yield Batch(np.array([n], dtype=np.int64), np.atleast_2d(np.asarray(v, dtype=float)))


def greedy_cone_fill(ctx: SteeringContext, zi: int, pool, b: float, s: float,
                     radius: Optional[float] = None, forbidden=None):
    """Indices from ``pool`` (in cone ``zi``) whose sum has norm in ``(b - s, b]``.

    Terms are visited in increasing index order.  A term is added when the
    running norm plus its own norm stays ``<= b``; filling stops once the
    running norm exceeds ``b - s``.  Returns ``(indices, sum_vector)``.
    """
    total = np.zeros(ctx.dim)
    chosen = []
    if b <= 0:
        return chosen, total
    r = ctx.delta if radius is None else radius
    z = ctx.D0[zi]
    bad = None if not forbidden else np.fromiter(forbidden, dtype=np.int64)
    running = 0.0
    for batch in _as_batches(pool):
        if running > b - s:
            batch.examined = 0
            break
        idx, vecs = batch.idx, batch.vecs
        norms = np.linalg.norm(vecs, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        ok = (norms > 0) & (np.linalg.norm(vecs / safe[:, None] - z, axis=1) < r)
        if bad is not None:
            ok &= ~np.isin(idx, bad)
        rows = np.flatnonzero(ok)
        finished = False
        while rows.size:
            # running only grows, so a term that overshoots now always will
            rows = rows[running + norms[rows] <= b]
            if not rows.size:
                break
            cum = total + np.cumsum(vecs[rows], axis=0)
            cn = np.linalg.norm(cum, axis=1)
            prev = np.concatenate([[running], cn[:-1]])
            viol = np.flatnonzero(prev + norms[rows] > b)
            stop = np.flatnonzero(cn > b - s)
            tv = int(viol[0]) if viol.size else rows.size
            ts = int(stop[0]) if stop.size else rows.size
            if ts < tv:
                chosen += idx[rows[:ts + 1]].tolist()
                total, running = cum[ts], float(cn[ts])
                batch.examined = int(rows[ts]) + 1
                finished = True
                break
            if tv:
                chosen += idx[rows[:tv]].tolist()
                total, running = cum[tv - 1], float(cn[tv - 1])
            rows = rows[tv + 1:]
        if finished:
            break
    if not running > b - s:
        raise PoolExhausted(
            f"cone {zi}: pool ran dry at norm {running:.6g}, needed more than {b - s:.6g}")
    return chosen, total


@dataclass
class SteerResult:
    indices: list
    total: np.ndarray
    target: np.ndarray
    eps: float
    weights: np.ndarray
    radius: float
    slack: float
    per_cone: list = field(default_factory=list)
    pr0_residual: float = 0.0
    pr1_residue: float = 0.0


def steer(ctx: SteeringContext, pool, x, eps: float, forbidden=(),
          budget: Optional[int] = None, weights=None,
          scan_cap: Optional[int] = None) -> SteerResult:
    """Finite set ``E`` of pool indices with ``||pr_0(x - sum_E x_n)|| < eps``.

    Per-cone sums are at most the gauge-minimal weights ``w_z`` of ``x``, whose
    total is at most ``max(||x||, eps) / delta``; this keeps every sub-sum of
    ``E`` under ``C * max(||x||, eps)``.  ``scan_cap`` optionally bounds the
    indices scanned per cone.
    """
    x = np.asarray(x, dtype=float)
    if eps <= 0:
        raise ValueError("eps must be positive")
    px = ctx.X0.project(x)
    if _norm(x - px) > 1e-9 * max(1.0, _norm(x)):
        raise TargetOutsideX0("target has a component outside span(D0)")
    x = px
    k = ctx.size
    if _norm(x) < eps:
        return SteerResult([], np.zeros(ctx.dim), x, eps, np.zeros(k), ctx.delta, 0.0,
                           [[] for _ in range(k)], _norm(x), 0.0)
    e = min(eps, ctx.delta / 2)
    w = ctx.weights(x) if weights is None else np.asarray(weights, dtype=float)
    lam = float(w.sum())
    r = ctx.cone_radius(e, lam)
    s = e / (2 * k)
    forbidden = set(forbidden) if forbidden else None
    chosen, per_cone = [], []
    total = np.zeros(ctx.dim)
    for zi in range(k):
        batches = pool.batches(zi, budget) if scan_cap is None else pool.batches(zi, budget, scan_cap)
        ids, sz = greedy_cone_fill(ctx, zi, batches, float(w[zi]), s, r, forbidden)
        per_cone.append(ids)
        chosen += ids
        total = total + sz
    pt = ctx.X0.project(total)
    pool.consume(chosen)
    return SteerResult(sorted(chosen), total, x, eps, w, r, s, per_cone,
                       _norm(x - pt), _norm(total - pt))

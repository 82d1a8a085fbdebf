"""Sum range of a vector series and permutations realising any of its points.

``analyze`` peels off one steering simplex per level: on the current space
``V`` it finds the divergence directions of ``pr_V x_n``, reduces them to a
minimal simplex ``D0`` and recurses on the complement of ``span(D0)`` inside
``V``.  ``rearrange_to_target`` builds the matching permutation level by
level, each level interleaving the permutation of the next one with
steering material.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .directions import VanishStatus, estimate_divergence_directions
from .exceptions import (
    DuplicateIndex,
    Inconclusive,
    InfeasibleSeries,
    InfeasibleTarget,
    PoolExhausted,
)
from .geometry import (
    Subspace,
    caratheodory_reduce,
    separating_direction,
    zero_in_convex_hull,
)
from .scalar import ScalarClassification, ScalarSeries, Verdict, classify_scalar
from .series import TermStream, cross_check_certificate
from .steering import (
    DEFAULT_SCAN_BUDGET,
    LevelTerms,
    OmegaSelection,
    SteeringContext,
    _norm,
    build_steering_context,
    steer,
)

TARGET_TOL = 1e-6
KAPPA_PER_DIRECTION = 16


@dataclass
class Budgets:
    """Finite-prefix sizes and work limits."""

    prefix: int = 100_000
    scan: int = DEFAULT_SCAN_BUDGET
    emissions: int = 1_000_000
    threshold: float = 5.0
    bucket_radius: float = 0.1


@dataclass
class Level:
    space: Subspace
    directions: np.ndarray
    source: str
    ctx: Optional[SteeringContext] = None
    gamma: Optional[Subspace] = None
    claim4_gap: float = 0.0

    @property
    def absolute(self) -> bool:
        return self.ctx is None

    def describe(self) -> dict:
        out = {
            "dim": self.space.dim,
            "D": self.directions.tolist(),
            "source": self.source,
        }
        if self.ctx is not None:
            out.update(D0=self.ctx.D0.tolist(), X0=self.ctx.X0.basis.tolist(),
                       X1=self.ctx.X1.basis.tolist(), delta=self.ctx.delta, C=self.ctx.C,
                       claim4_gap=self.claim4_gap)
        return out


@dataclass
class SumRange:
    """Affine set ``anchor + directions`` of potential sums, with ``Gamma``.

    ``anchor`` is the point of the range lying in ``gamma``.
    """

    feasible: bool
    anchor: Optional[np.ndarray]
    directions: Optional[Subspace]
    gamma: Optional[Subspace]
    witness: Optional[np.ndarray] = None
    witness_classification: Optional[ScalarClassification] = None
    levels: list = field(default_factory=list)
    estimated: bool = False

    @property
    def diagnostics(self) -> list:
        return [lv.describe() for lv in self.levels]

    def contains(self, target, tol: float = TARGET_TOL) -> bool:
        if not self.feasible:
            return False
        t = np.asarray(target, dtype=float)
        return np.linalg.norm(self.gamma.project(t) - self.anchor) <= tol


def _level_certificate(stream: TermStream, space: Subspace, top: bool):
    if top:
        return stream.certificate
    return stream.certificate_on(space)


def _absolute_sum(stream: TermStream, space: Subspace, N: int) -> np.ndarray:
    total = np.zeros(stream.dim)
    for start in range(1, N + 1, 65536):
        stop = min(N + 1, start + 65536)
        total += stream.term_range(start, stop).sum(axis=0)
    return space.project(total)


def _infeasible(stream, f, levels, estimated, budgets) -> SumRange:
    cls = classify_scalar(ScalarSeries.from_stream(stream, f), N=budgets.prefix,
                          M=budgets.threshold)
    return SumRange(False, None, None, None, f, cls, levels, estimated)


def analyze(stream: TermStream, budgets: Optional[Budgets] = None,
            allow_estimated: bool = False, paranoid: bool = False) -> SumRange:
    """Sum range of ``stream``.

    Uses the stream's certificate at every level; without one, raises
    Inconclusive unless ``allow_estimated`` switches to the heuristic
    direction estimator.
    """
    budgets = budgets or Budgets()
    d = stream.dim
    if paranoid and stream.certificate is not None:
        cross_check_certificate(stream, budgets.prefix)
    V = Subspace.full(d)
    levels = []
    estimated = False
    while True:
        cert = _level_certificate(stream, V, not levels) if V.dim else None
        if V.dim == 0:
            D, source, gamma_cert = np.zeros((0, d)), "trivial", V
        elif cert is not None:
            D = cert.divergence_directions.reshape(-1, d)
            source = "certificate"
            gamma_cert = cert.gamma(d)
        else:
            if not allow_estimated:
                raise Inconclusive(
                    "no certificate for the series on a space of dimension "
                    f"{V.dim}; pass allow_estimated to use the estimator")
            report = estimate_divergence_directions(
                stream, budgets.prefix, budgets.bucket_radius, budgets.threshold,
                space=None if V.dim == d else V, use_certificate=False)
            estimated = True
            source = "estimated"
            if report.terms_vanish is not None and report.terms_vanish.status is VanishStatus.FAIL:
                w = report.terms_vanish.witness
                if w is not None:
                    levels.append(Level(V, np.zeros((0, d)), source))
                    return _infeasible(stream, V.project(w) / np.linalg.norm(V.project(w)),
                                       levels, estimated, budgets)
            D = report.vectors().reshape(-1, d) if report.directions else np.zeros((0, d))
            gamma_cert = None

        if D.shape[0] == 0:
            levels.append(Level(V, D, source, gamma=V))
            anchor = _absolute_sum(stream, V, budgets.prefix) if V.dim else np.zeros(d)
            return SumRange(True, anchor, V.complement(), V, levels=levels, estimated=estimated)

        witness = zero_in_convex_hull(D)
        if witness is None:
            f = separating_direction(D)
            levels.append(Level(V, D, source))
            return _infeasible(stream, f, levels, estimated, budgets)

        reduced = caratheodory_reduce(witness)
        ctx = build_steering_context(reduced, d, outer=V)
        gap = 0.0
        if gamma_cert is not None and gamma_cert.dim:
            gap = float(max(np.linalg.norm(gamma_cert.project(z)) for z in ctx.D0))
        levels.append(Level(V, D, source, ctx=ctx, gamma=gamma_cert, claim4_gap=gap))
        if ctx.X1.dim >= V.dim:
            raise AssertionError("recursion must reduce the dimension")
        V = ctx.X1


@dataclass
class FeasibilityVerdict:
    feasible: bool
    witness: Optional[np.ndarray] = None
    classification: Optional[ScalarClassification] = None
    sum_range: Optional[SumRange] = None


def check_feasibility(stream: TermStream, budgets: Optional[Budgets] = None) -> FeasibilityVerdict:
    """Whether every functional's scalar series is potentially convergent."""
    sr = analyze(stream, budgets, allow_estimated=True)
    if sr.feasible:
        return FeasibilityVerdict(True, sum_range=sr)
    if sr.witness_classification.verdict is Verdict.INCONCLUSIVE:
        raise Inconclusive("the witness functional's scalar series is inconclusive")
    return FeasibilityVerdict(False, sr.witness, sr.witness_classification, sr)


# -- permutation construction -----------------------------------------------

@dataclass
class RoundRecord:
    i: int
    min_lambda: Optional[int]
    min_omega: int
    steer_size: int
    eps: float
    a_norm: float
    residual: float
    cond5_ratio: float

    @property
    def condition4(self) -> bool:
        return self.residual < 2 * self.eps


class _Peekable:
    def __init__(self, it):
        self._it = iter(it)
        self._buf = deque()

    def peek(self):
        if not self._buf:
            self._buf.append(next(self._it))
        return self._buf[0]

    def pop(self):
        return self._buf.popleft() if self._buf else next(self._it)


def _flatten(blocks):
    for b in blocks:
        yield from b


def _identity_blocks(size: int = 4096):
    for start in itertools.count(1, size):
        yield list(range(start, start + size))


class Interleaver:
    """One level of the construction: emits ``F_0`` and then rounds
    ``{min Lambda_i, min Omega_i} + E_i``.

    ``schedule`` is ``"geometric"`` (``eps_i = 2^-(i+1)``) or ``"adaptive"``,
    which never goes below ``kappa`` times the norm of the next available
    steering term, so a round only asks for precision the supply can give.
    """

    def __init__(self, stream: TermStream, level: Level, x, sigma_blocks,
                 scan_budget: int = DEFAULT_SCAN_BUDGET, schedule: str = "adaptive",
                 audit_subsets: int = 16, seed: int = 0, keep_rounds: bool = True):
        if schedule not in ("geometric", "adaptive"):
            raise ValueError("schedule must be 'geometric' or 'adaptive'")
        self.ctx = level.ctx
        self.x = self.ctx.X0.project(np.asarray(x, dtype=float))
        self.terms = LevelTerms(stream, level.space)
        self.omega = OmegaSelection(self.terms, self.ctx, scan_budget)
        self.sigma = _Peekable(_flatten(sigma_blocks))
        self.scan_budget = scan_budget
        self.schedule = schedule
        self.kappa = KAPPA_PER_DIRECTION * self.ctx.size
        self.audit_subsets = audit_subsets
        self.rng = np.random.default_rng(seed)
        self.keep_rounds = keep_rounds
        self.rounds = []
        self.S0 = np.zeros(self.ctx.dim)
        self.i = 0
        self.eps = 0.5
        self.max_emitted = 0
        self.initial_residual = None
        self.lambda_emitted = 0
        self.cond4_failures = 0
        self.cond5_failures = 0
        self.F0 = None
        self._P0 = self.ctx.X0.projector()

    def pr0(self, v):
        return self._P0 @ v

    def _steer(self, a, eps, w=None):
        while True:
            try:
                # the halving schedule would otherwise scan without bound
                cap = self.scan_budget if self.schedule == "geometric" else None
                return steer(self.ctx, self.omega, a, eps, weights=w, scan_cap=cap), eps
            except PoolExhausted:
                if self.schedule == "geometric" or eps >= 0.5:
                    raise
                eps = min(0.5, 2 * eps)

    def _next_eps(self, a, w) -> float:
        geo = 2.0 ** -(self.i + 1)
        if self.schedule == "geometric":
            return geo
        heads = [self.omega.head_norm(zi) for zi in range(self.ctx.size) if w[zi] > 0]
        tau = max(heads) if heads else 0.0
        return min(self.eps, max(geo, self.kappa * tau))

    def _draw_lambda(self) -> Optional[int]:
        self.omega.ensure_decided(self.max_emitted)
        frontier = self.omega.decided_frontier
        while True:
            m = self.sigma.peek()
            if m >= frontier:
                return None
            self.sigma.pop()
            if self.omega.owner[m - 1] < 0:
                return m

    def _audit5(self, steer_vecs, extra, a_norm, eps) -> float:
        if not self.audit_subsets or steer_vecs.shape[0] == 0:
            return 0.0
        bound = self.ctx.C * max(a_norm, eps)
        masks = self.rng.random((self.audit_subsets, steer_vecs.shape[0])) < 0.5
        sums = np.linalg.norm(masks @ steer_vecs, axis=1)
        ratio = float(sums.max() / bound)
        if extra.shape[0]:
            with_extra = np.linalg.norm(masks @ steer_vecs + extra.sum(axis=0), axis=1)
            ratio = max(ratio, float(with_extra.max() / (bound + np.linalg.norm(extra, axis=1).sum())))
        return ratio

    def _initial_set(self):
        """``F_0``: Omega terms taken greedily in index order while they bring
        the ``X0`` part closer to ``x``, then one steering call."""
        S = np.zeros(self.ctx.dim)
        chosen = []
        om = self.omega
        n = 0
        while np.linalg.norm(self.x - S) >= 0.5 and n < self.scan_budget:
            n += 1
            if not om.contains(n):
                continue
            v = self.pr0(self.terms.get(n))
            if np.linalg.norm(self.x - S - v) < np.linalg.norm(self.x - S):
                om.mark_used([n])
                chosen.append(n)
                S = S + v
        res, eps = self._steer(self.x - S, 0.5)
        return sorted(chosen + res.indices), S + self.pr0(res.total), eps

    def _order(self, head, v_head, E, vecs, S_prev) -> list:
        """Emission order of a round: ``E`` in index order, each head term
        inserted at the first point where it brings the partial sum closer."""
        if not E:
            return list(head)
        P = self._P0
        pre = S_prev + np.vstack([np.zeros(self.ctx.dim), np.cumsum(vecs @ P, axis=0)])
        slots = []
        for v in v_head @ P:
            cur = self.x - pre
            better = np.linalg.norm(cur - v, axis=1) < np.linalg.norm(cur, axis=1)
            t = int(np.argmax(better)) if better.any() else len(E)
            slots.append(t)
            pre[t:] += v
        out = []
        for t in range(len(E) + 1):
            out += [n for n, st in zip(head, slots) if st == t]
            if t < len(E):
                out.append(E[t])
        return out

    def blocks(self) -> Iterator[list]:
        F0, self.S0, self.eps = self._initial_set()
        self.initial_residual = float(np.linalg.norm(self.x - self.S0))
        self.F0 = list(F0)
        if F0:
            self.max_emitted = max(F0)
        yield F0
        while True:
            l = self._draw_lambda()
            o = self.omega.min_unused()
            self.omega.mark_used([o])
            head = [o] if l is None else [l, o]
            v_head = np.array([self.terms.get(n) for n in head])
            a = self.x - self.S0 - self.pr0(v_head.sum(axis=0))
            w = self.ctx.weights(a)
            eps = self._next_eps(a, w)
            res, eps = self._steer(a, eps, w)
            self.eps = eps
            E = res.indices
            S_prev = self.S0
            self.S0 = self.S0 + self.pr0(v_head.sum(axis=0) + res.total)
            residual = _norm(self.x - self.S0)
            a_norm = _norm(a)
            if E:
                self.terms.ensure(E[-1])
            vecs = self.terms.vec[np.asarray(E, dtype=np.int64) - 1].reshape(-1, self.ctx.dim)
            ratio = self._audit5(vecs, v_head, a_norm, eps)
            rec = RoundRecord(self.i, l, o, len(E), eps, a_norm, residual, ratio)
            if not rec.condition4:
                self.cond4_failures += 1
            if ratio > 1 + 1e-9:
                self.cond5_failures += 1
            if self.keep_rounds:
                self.rounds.append(rec)
            self.last_round = rec
            if l is not None:
                self.lambda_emitted += 1
            block = self._order(head, v_head, E, vecs, S_prev)
            self.max_emitted = max(self.max_emitted, max(block))
            self.i += 1
            yield block


def level_blocks(stream: TermStream, levels: list, depth: int, y, budgets: Budgets,
                 schedule: str = "adaptive", audit_subsets: int = 16, seed: int = 0,
                 engines: Optional[list] = None):
    """Block generator of the permutation at recursion ``depth`` aimed at ``y``."""
    lv = levels[depth]
    if lv.absolute:
        return _identity_blocks()
    ctx = lv.ctx
    inner = level_blocks(stream, levels, depth + 1, ctx.X1.project(y), budgets,
                         schedule, audit_subsets, seed + 1, engines)
    eng = Interleaver(stream, lv, ctx.X0.project(y), inner, budgets.scan, schedule,
                      audit_subsets, seed, keep_rounds=depth == 0)
    if engines is not None:
        engines.insert(0, eng)
    return eng.blocks()


@dataclass
class Checkpoint:
    step: int
    dist: float
    window_max: float
    frontier: int


class PermutationStream:
    """Lazily emitted bijection of the index set with a convergence trace.

    Indices are in the user's numbering (zero rows of a table are attached
    right before the next nonzero term).  ``frontier`` is the smallest index
    not yet emitted.
    """

    def __init__(self, stream: TermStream, blocks, target, budget: int = 1_000_000,
                 checkpoints=None, full_trace: bool = False, engines=None):
        self.stream = stream
        self.target = np.asarray(target, dtype=float)
        self.budget = budget
        self._blocks = iter(blocks)
        self.engines = engines or []
        self.steps = 0
        self.partial = np.zeros(stream.dim)
        self._seen = np.zeros(1 << 16, dtype=bool)
        self._frontier = 1
        self._buf = deque()
        self._held = None
        self.full_trace = full_trace
        self.rows = []
        cps = default_checkpoints(budget) if checkpoints is None else sorted(set(int(c) for c in checkpoints))
        self.checkpoint_steps = cps
        self._cp_pos = 0
        self.checkpoints = []
        self._window_max = 0.0
        self.last_dist = float(np.linalg.norm(self.target))

    @property
    def frontier(self) -> int:
        return self._frontier

    def __iter__(self):
        return self

    def __next__(self) -> int:
        if not self._buf:
            if self.steps >= self.budget:
                raise StopIteration
            self._advance_block()
        return self._buf.popleft()

    def _expand(self, block):
        imap = self.stream.index_map
        if imap is None:
            return list(block)
        out = []
        for n in block:
            out += imap.attached(int(n))
        return out

    def _next_block(self):
        if self._held is not None:
            block, self._held = self._held, None
            return block
        return self._expand(next(self._blocks))

    def _advance_block(self):
        self._consume_block(self._next_block())

    def _consume_block(self, block):
        block = block[: self.budget - self.steps]
        if not block:
            return
        idx = np.asarray(block, dtype=np.int64)
        top = int(idx.max())
        if top > self._seen.size:
            grow = max(top, 2 * self._seen.size) - self._seen.size
            self._seen = np.concatenate([self._seen, np.zeros(grow, dtype=bool)])
        dup = self._seen[idx - 1]
        if np.any(dup) or np.unique(idx).size != idx.size:
            _, first = np.unique(idx, return_index=True)
            repeats = sorted(set(range(idx.size)) - set(first.tolist()))
            pos = int(np.flatnonzero(dup)[0]) if np.any(dup) else repeats[0]
            raise DuplicateIndex(int(idx[pos]), self.steps + pos + 1)
        terms = self.stream.original_terms(idx)
        partials = self.partial + np.cumsum(terms, axis=0)
        dists = np.linalg.norm(partials - self.target, axis=1)
        steps = self.steps + np.arange(1, idx.size + 1)
        if self.full_trace:
            self.rows.append((steps, idx, terms, partials, dists))
        pos = 0
        cps = self.checkpoint_steps
        while self._cp_pos < len(cps) and cps[self._cp_pos] <= steps[-1]:
            j = cps[self._cp_pos] - self.steps - 1
            self._window_max = max(self._window_max, float(dists[pos:j + 1].max()))
            self._seen[idx[pos:j + 1] - 1] = True
            self._update_frontier()
            self.checkpoints.append(Checkpoint(int(steps[j]), float(dists[j]),
                                               self._window_max, self._frontier))
            if not self.full_trace:
                self.rows.append((steps[j:j + 1], idx[j:j + 1], terms[j:j + 1],
                                  partials[j:j + 1], dists[j:j + 1]))
            self._window_max = 0.0
            pos = j + 1
            self._cp_pos += 1
        if pos < idx.size:
            self._window_max = max(self._window_max, float(dists[pos:].max()))
            self._seen[idx[pos:] - 1] = True
            self._update_frontier()
        self._last_row = (steps[-1:], idx[-1:], terms[-1:], partials[-1:], dists[-1:])
        self.partial = partials[-1]
        self.steps = int(steps[-1])
        self.last_dist = float(dists[-1])
        self._buf.extend(block)

    def _update_frontier(self):
        f = self._frontier
        seen = self._seen
        for _ in range(64):
            if f > seen.size or not seen[f - 1]:
                self._frontier = f
                return
            f += 1
        while f <= seen.size:
            miss = np.flatnonzero(~seen[f - 1:f - 1 + 65536])
            if miss.size:
                f += int(miss[0])
                break
            f += min(65536, seen.size - f + 1)
        self._frontier = f

    def run(self, emissions: Optional[int] = None, whole_blocks: bool = True) -> "PermutationStream":
        """Emit up to ``emissions`` steps (default: the budget).

        With ``whole_blocks`` the run stops before a block (a round of the
        construction) that would overshoot, so it ends on a round boundary.
        """
        goal = self.budget if emissions is None else min(emissions, self.budget)
        group = []
        while self.steps + len(group) < goal:
            block = self._next_block()
            done = self.steps + len(group)
            if whole_blocks and done and done + len(block) > goal:
                self._held = block
                break
            group += block
            if len(group) >= 4096:
                self._consume_block(group)
                group = []
        if group:
            self._consume_block(group)
        self._buf.clear()
        self._close_window()
        return self

    def _close_window(self):
        """Record a checkpoint at the current step if the last one is older."""
        if self.steps and (not self.checkpoints or self.checkpoints[-1].step < self.steps):
            self.checkpoints.append(Checkpoint(self.steps, self.last_dist,
                                               self._window_max, self._frontier))
            if not self.full_trace:
                self.rows.append(self._last_row)
            self._window_max = 0.0

    def trace_rows(self):
        for steps, idx, terms, partials, dists in self.rows:
            for r in range(steps.size):
                yield (int(steps[r]), int(idx[r]), terms[r], partials[r], float(dists[r]))

    def write_csv(self, fh):
        d = self.stream.dim
        head = ["step", "emitted_index"] + [f"term_{j}" for j in range(d)] + \
               [f"partial_{j}" for j in range(d)] + ["dist_to_target"]
        fh.write(",".join(head) + "\n")
        for step, n, term, partial, dist in self.trace_rows():
            vals = [str(step), str(n)] + [repr(float(v)) for v in term] + \
                   [repr(float(v)) for v in partial] + [repr(dist)]
            fh.write(",".join(vals) + "\n")

    @property
    def rounds(self) -> list:
        return self.engines[0].rounds if self.engines else []


def default_checkpoints(budget: int, count: int = 24) -> list:
    """Log-spaced checkpoint steps ending at ``budget``."""
    if budget < 1:
        return []
    pts = np.unique(np.round(np.logspace(0, np.log10(budget), count)).astype(int))
    return [int(p) for p in pts if p >= 1]


def rearrange_to_target(stream: TermStream, target, budgets: Optional[Budgets] = None,
                        sum_range: Optional[SumRange] = None, allow_estimated: bool = False,
                        tol: float = TARGET_TOL, checkpoints=None, full_trace: bool = False,
                        schedule: str = "adaptive", audit_subsets: int = 16,
                        seed: int = 0) -> PermutationStream:
    """Permutation stream whose partial sums converge to ``target``.

    Raises InfeasibleSeries when the series has no sum range and
    InfeasibleTarget when ``target`` is off the range by more than ``tol``.
    """
    budgets = budgets or Budgets()
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.size != stream.dim:
        raise ValueError(f"target must have dimension {stream.dim}")
    sr = sum_range or analyze(stream, budgets, allow_estimated=allow_estimated)
    if not sr.feasible:
        raise InfeasibleSeries(f"series is not rearrangeable: {sr.witness_classification} "
                               f"along f = {np.round(sr.witness, 6).tolist()}", sr.witness)
    off = sr.gamma.project(target) - sr.anchor
    if np.linalg.norm(off) > tol:
        raise InfeasibleTarget(
            f"target leaves the sum range: its Gamma component {sr.gamma.project(target).tolist()} "
            f"must equal {sr.anchor.tolist()}", off)
    engines = []
    blocks = level_blocks(stream, sr.levels, 0, target, budgets, schedule,
                          audit_subsets, seed, engines)
    return PermutationStream(stream, blocks, target, budgets.emissions, checkpoints,
                             full_trace, engines)


@dataclass
class ConvergenceReport:
    checkpoints: list
    emitted: int
    duplicates: bool
    frontier_ok: bool
    final_dist: float

    def window_maxima(self) -> list:
        return [c.window_max for c in self.checkpoints]

    def decreasing(self, last: int = 5) -> bool:
        m = self.window_maxima()[-last:]
        return len(m) == last and all(b < a for a, b in zip(m, m[1:]))


def verify_stream(perm: PermutationStream, target=None, checkpoints=None) -> ConvergenceReport:
    """Drive ``perm`` to its last checkpoint and audit the result.

    Every emitted index is re-checked for duplicates (DuplicateIndex), and
    the smallest unemitted index, recomputed from the emitted set, must
    match the stream's own frontier record.  The stream ends at the last
    checkpoint.
    """
    if checkpoints is not None:
        cps = sorted(set(int(c) for c in checkpoints))
        if perm.steps and cps and cps[0] <= perm.steps:
            raise ValueError("checkpoints must lie ahead of the stream")
        perm.checkpoint_steps = cps
        perm._cp_pos = 0
    if target is not None and not np.allclose(np.asarray(target, dtype=float), perm.target):
        raise ValueError("target differs from the stream's target")
    goal = perm.checkpoint_steps[-1] if perm.checkpoint_steps else perm.budget
    perm.budget = min(perm.budget, goal)
    emitted = list(perm)
    _, smallest = audit_indices(emitted)
    return ConvergenceReport(list(perm.checkpoints), perm.steps, False,
                             smallest == perm.frontier, perm.last_dist)


def audit_indices(indices) -> tuple:
    """``(count, smallest unemitted index)``; raises DuplicateIndex on a repeat."""
    seen = set()
    for step, n in enumerate(indices, 1):
        if n in seen:
            raise DuplicateIndex(n, step)
        seen.add(n)
    smallest = 1
    while smallest in seen:
        smallest += 1
    return len(seen), smallest

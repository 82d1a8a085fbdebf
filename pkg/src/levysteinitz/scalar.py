"""Scalar series: classification of the sum range and Riemann rearrangement."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .exceptions import NotRearrangeable

DEFAULT_BUDGET = 100_000
DEFAULT_THRESHOLD = 5.0
NONVANISHING_FLOOR = 0.1
STALL_FRACTION = 1e-3
CHUNK = 4096


class Verdict(str, Enum):
    ABSOLUTE = "AbsolutelyConvergent"
    ANY_REAL = "AnyRealAchievable"
    DIVERGES = "DivergesAllRearrangements"
    INCONCLUSIVE = "Inconclusive"


class ScalarSeries:
    """Real sequence ``a_1, a_2, ...`` evaluated in vectorised batches.

    ``certificate`` optionally pins the exact verdict: one of ``"absolute"``,
    ``"any"``, ``"+"`` or ``"-"``.
    """

    def __init__(self, values: Callable[[np.ndarray], np.ndarray],
                 certificate: Optional[str] = None, description: str = ""):
        if certificate not in (None, "absolute", "any", "+", "-"):
            raise ValueError(f"bad scalar certificate {certificate!r}")
        self._values = values
        self.certificate = certificate
        self.description = description

    def values(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        return np.asarray(self._values(idx), dtype=float).reshape(idx.size)

    def value_range(self, start: int, stop: int) -> np.ndarray:
        return self.values(np.arange(start, stop, dtype=np.int64))

    @classmethod
    def from_function(cls, fn, certificate=None, description=""):
        return cls(fn, certificate, description)

    @classmethod
    def from_array(cls, arr, certificate=None, description="table"):
        """Finite table, continued by zeros."""
        a = np.asarray(arr, dtype=float)

        def values(n):
            out = np.zeros(n.size)
            inside = n <= a.size
            out[inside] = a[n[inside] - 1]
            return out

        return cls(values, certificate, description)

    @classmethod
    def from_stream(cls, stream, f) -> "ScalarSeries":
        """The series ``<f, x_n>`` with a verdict read off the stream's certificate."""
        f = np.asarray(f, dtype=float)
        return cls(lambda n: stream.terms(n) @ f, _certificate_verdict(stream, f),
                   f"<f, {stream.description}>")


def _certificate_verdict(stream, f, tol: float = 1e-9) -> Optional[str]:
    cert = stream.certificate
    if cert is None:
        return None
    if cert.absolutely_convergent:
        return "absolute"
    dirs = cert.divergence_directions
    vals = dirs @ f if dirs.size else np.zeros(0)
    if np.any(vals > tol) and np.any(vals < -tol):
        return "any"
    if vals.size and np.all(vals > tol):
        return "+"
    if vals.size and np.all(vals < -tol):
        return "-"
    if cert.gamma(stream.dim).contains(f):
        return "absolute"
    return None


@dataclass
class ScalarClassification:
    verdict: Verdict
    value: Optional[float] = None
    sign: int = 0
    evidence: dict = field(default_factory=dict)

    def __str__(self):
        if self.verdict is Verdict.ABSOLUTE:
            return f"{self.verdict.value}({self.value:.12g})"
        if self.verdict is Verdict.DIVERGES:
            return f"{self.verdict.value}({'+' if self.sign > 0 else '-' if self.sign < 0 else '±'})"
        return self.verdict.value


def signed_part_sums(series: ScalarSeries, N: int):
    """Positive-part sum, negative-part sum and max |a_n| over N/2 < n <= N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    pos = neg = 0.0
    tail = 0.0
    half = N // 2
    for start in range(1, N + 1, 65536):
        stop = min(N + 1, start + 65536)
        a = series.value_range(start, stop)
        pos += float(np.clip(a, 0, None).sum())
        neg += float(np.clip(a, None, 0).sum())
        if stop - 1 > half:
            lo = max(start, half + 1)
            tail = max(tail, float(np.abs(a[lo - start:]).max()))
    return pos, neg, tail


def classify_scalar(series: ScalarSeries, N: int = DEFAULT_BUDGET,
                    M: float = DEFAULT_THRESHOLD,
                    floor: float = NONVANISHING_FLOOR,
                    stall: float = STALL_FRACTION) -> ScalarClassification:
    """Finite-prefix verdict on which real numbers are potential sums.

    A side "diverges" once its partial sum exceeds ``M``; it counts as
    "bounded" when it stays below ``M`` and grew by at most ``stall * M``
    over the second half of the prefix.  Terms fail to vanish when at least
    ``N/10`` of them have magnitude ``>= floor``.
    """
    if N < 1 or M <= 0:
        raise ValueError("need N >= 1 and M > 0")
    a = series.value_range(1, N + 1)
    half = N // 2
    pos_part, neg_part = np.clip(a, 0, None), np.clip(a, None, 0)
    pos, neg = float(pos_part.sum()), float(neg_part.sum())
    evidence = {
        "N": N, "M": M, "pos_sum": pos, "neg_sum": neg,
        "max_tail": float(np.abs(a[half:]).max()) if N > half else 0.0,
        "pos_growth": float(pos_part[half:].sum()),
        "neg_growth": float(-neg_part[half:].sum()),
        "big_pos": int(np.count_nonzero(a >= floor)),
        "big_neg": int(np.count_nonzero(a <= -floor)),
    }
    total = float(np.sum(a))

    cert = series.certificate
    if cert is not None:
        evidence["source"] = "certificate"
        if cert == "absolute":
            return ScalarClassification(Verdict.ABSOLUTE, total, 0, evidence)
        if cert == "any":
            return ScalarClassification(Verdict.ANY_REAL, None, 0, evidence)
        return ScalarClassification(Verdict.DIVERGES, None, 1 if cert == "+" else -1, evidence)
    evidence["source"] = "prefix"

    big_pos, big_neg = evidence["big_pos"], evidence["big_neg"]
    if big_pos + big_neg >= N / 10:
        if big_pos >= N / 10 and big_neg < N / 10:
            sign = 1
        elif big_neg >= N / 10 and big_pos < N / 10:
            sign = -1
        else:
            sign = 0
        return ScalarClassification(Verdict.DIVERGES, None, sign, evidence)

    pos_bounded = pos <= M and evidence["pos_growth"] <= stall * M
    neg_bounded = -neg <= M and evidence["neg_growth"] <= stall * M
    vanishing = evidence["max_tail"] < floor
    if pos > M and -neg > M:
        if vanishing:
            return ScalarClassification(Verdict.ANY_REAL, None, 0, evidence)
    elif pos > M and neg_bounded:
        return ScalarClassification(Verdict.DIVERGES, None, 1, evidence)
    elif -neg > M and pos_bounded:
        return ScalarClassification(Verdict.DIVERGES, None, -1, evidence)
    elif pos - neg <= M and pos_bounded and neg_bounded:
        return ScalarClassification(Verdict.ABSOLUTE, total, 0, evidence)
    return ScalarClassification(Verdict.INCONCLUSIVE, None, 0, evidence)


class RiemannStream:
    """Greedy crossing rearrangement of a scalar series towards ``target``.

    Iterating yields 1-based indices.  Nonnegative terms form the "positive"
    side (ties at ``partial == target`` draw from it).  ``frontier`` is the
    smallest index not yet emitted; ``crossings`` counts side switches.
    """

    def __init__(self, series: ScalarSeries, target: float, scan_budget: int = 1_000_000,
                 identity: bool = False):
        self.series = series
        self.target = float(target)
        self.scan_budget = scan_budget
        self.partial = 0.0
        self.steps = 0
        self.crossings = 0
        self.last_term = 0.0
        self.exhausted = False
        self.crossing_errors = []
        self._queues = (deque(), deque())  # positive side, negative side
        self._pending = deque()
        self._scanned = 0
        self._side = 0
        if identity:
            self.exhausted = True

    def __iter__(self):
        return self

    def _chunk(self):
        start = self._scanned + 1
        vals = self.series.value_range(start, start + CHUNK).tolist()
        self._scanned += CHUNK
        return [(start + off, v) for off, v in enumerate(vals)]

    def _pull(self, side):
        q = self._queues[side]
        scanned_at_start = self._scanned
        while not q:
            if self._scanned - scanned_at_start >= self.scan_budget:
                return None
            for item in self._chunk():
                self._queues[0 if item[1] >= 0 else 1].append(item)
        return q.popleft()

    def _enter_tail(self):
        # one side ran dry: everything left goes out in increasing index order
        self._pending = deque(sorted(list(self._queues[0]) + list(self._queues[1])))
        for q in self._queues:
            q.clear()
        self.exhausted = True

    @property
    def frontier(self) -> int:
        heads = [q[0][0] for q in (*self._queues, self._pending) if q]
        return min(heads) if heads else self._scanned + 1

    def __next__(self) -> int:
        if not self.exhausted:
            side = 0 if self.partial <= self.target else 1
            item = self._pull(side)
            if item is None:
                self._enter_tail()
            elif side != self._side:
                self.crossings += 1
                self._side = side
        if self.exhausted:
            if not self._pending:
                self._pending.extend(self._chunk())
            item = self._pending.popleft()
        n, v = item
        before = self.partial
        self.partial += v
        self.steps += 1
        self.last_term = v
        if (before <= self.target) != (self.partial <= self.target):
            self.crossing_errors.append((self.steps, abs(self.partial - self.target), abs(v)))
        return n


def riemann_rearrange(series: ScalarSeries, target: float,
                      classification: Optional[ScalarClassification] = None,
                      tol: float = 1e-6, force: bool = False,
                      scan_budget: int = 1_000_000) -> RiemannStream:
    """Permutation stream whose partial sums converge to ``target``.

    Raises NotRearrangeable unless the series can reach ``target``: any real
    for conditionally convergent series, only the sum itself (kept in the
    original order) for absolutely convergent ones.
    """
    cls = classification or classify_scalar(series)
    if cls.verdict is Verdict.ABSOLUTE:
        if abs(cls.value - target) > tol:
            raise NotRearrangeable(
                f"absolutely convergent series sums to {cls.value:.12g}, not {target:.12g}")
        return RiemannStream(series, target, scan_budget, identity=True)
    if cls.verdict is Verdict.DIVERGES:
        raise NotRearrangeable(f"no rearrangement converges: {cls}")
    if cls.verdict is Verdict.INCONCLUSIVE and not force:
        raise NotRearrangeable("classification is inconclusive; pass force=True to try anyway")
    return RiemannStream(series, target, scan_budget)


def take(stream, k: int) -> list:
    return [next(stream) for _ in range(k)]

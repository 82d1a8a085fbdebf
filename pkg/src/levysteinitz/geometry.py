"""Fixed-dimension vector helpers and the small convex-geometry kernel.

Vectors are plain 1-D ``numpy`` float arrays.  Every rank or positivity
decision goes through a single tolerance, :data:`TOL`, which callers may
override per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .exceptions import DegenerateWitness, OutsideHull

TOL = 1e-9
MAX_DIM = 16
FRANK_WOLFE_STEPS = 200
# beyond this many candidate subsets the exact search hands over to NNLS + pivoting
MAX_SUBSETS = 200_000


def as_vector(v, dim: Optional[int] = None) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.size == 0 or arr.size > MAX_DIM:
        raise ValueError(f"vector dimension must be in 1..{MAX_DIM}, got {arr.size}")
    if dim is not None and arr.size != dim:
        raise ValueError(f"expected dimension {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector coordinates must be finite")
    return arr


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalise the zero vector")
    return v / n


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of R^d stored as an orthonormal basis (rows)."""

    ambient_dim: int
    basis: np.ndarray = field(default=None)

    def __post_init__(self):
        b = self.basis
        if b is None:
            b = np.zeros((0, self.ambient_dim))
        b = np.array(b, dtype=float).reshape(-1, self.ambient_dim)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors, ambient_dim: int, tol: float = TOL) -> "Subspace":
        """Orthonormal basis of span(vectors) by modified Gram-Schmidt."""
        rows = []
        for v in np.asarray(vectors, dtype=float).reshape(-1, ambient_dim):
            w = v.copy()
            for _ in range(2):
                for r in rows:
                    w -= np.dot(r, w) * r
            n = np.linalg.norm(w)
            if n > tol * max(1.0, np.linalg.norm(v)):
                rows.append(w / n)
        return cls(ambient_dim, np.array(rows).reshape(-1, ambient_dim))

    @classmethod
    def full(cls, d: int) -> "Subspace":
        return cls(d, np.eye(d))

    @classmethod
    def zero(cls, d: int) -> "Subspace":
        return cls(d, None)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def project(self, v) -> np.ndarray:
        return project(v, self)

    def complement(self) -> "Subspace":
        return orthonormal_complement(self)

    def complement_within(self, outer: "Subspace", tol: float = TOL) -> "Subspace":
        """Orthogonal complement of ``self`` inside ``outer``."""
        rows = [r - self.projector() @ r for r in outer.basis]
        return Subspace.span(rows, self.ambient_dim, tol=1e-7) if rows else Subspace.zero(self.ambient_dim)

    def __add__(self, other: "Subspace") -> "Subspace":
        return Subspace.span(np.vstack([self.basis, other.basis]), self.ambient_dim)

    def contains(self, v, tol: float = 1e-7) -> bool:
        v = np.asarray(v, dtype=float)
        return np.linalg.norm(v - self.project(v)) <= tol * max(1.0, np.linalg.norm(v))

    def same_as(self, other: "Subspace", tol: float = 1e-9) -> bool:
        return self.dim == other.dim and np.allclose(self.projector(), other.projector(), atol=tol)


def orthonormal_complement(sub: Subspace) -> Subspace:
    """Complement spanned by Gram-Schmidt over the standard axes."""
    d = sub.ambient_dim
    rows = [r for r in sub.basis]
    out = []
    for i in range(d):
        w = np.zeros(d)
        w[i] = 1.0
        for _ in range(2):
            for r in rows:
                w -= np.dot(r, w) * r
        n = np.linalg.norm(w)
        if n > 1e-6:
            w = w / n
            rows.append(w)
            out.append(w)
        if len(rows) == d:
            break
    return Subspace(d, np.array(out).reshape(-1, d))


def project(v, sub: Subspace) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if sub.dim == 0:
        return np.zeros_like(v)
    return sub.basis.T @ (sub.basis @ v)


@dataclass(frozen=True)
class ConvexWitness:
    """A convex combination of ``points`` that equals zero."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if p.ndim != 2 or p.shape[0] != w.size:
            raise ValueError("points and weights disagree in length")
        if np.any(w <= 0):
            raise ValueError("witness weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("witness weights must sum to 1")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.size

    def residual(self) -> float:
        return float(np.linalg.norm(self.weights @ self.points))


def _augmented(points: np.ndarray) -> np.ndarray:
    return np.vstack([points.T, np.ones(points.shape[0])])


def _solve_affine(points: np.ndarray, x: np.ndarray, tol: float):
    """Affine weights t with sum(t) = 1, t @ points = x.

    Returns ``(t, residual, sigma_min)``; ``t`` is None when the points are
    affinely dependent at tolerance ``tol``.
    """
    a = _augmented(points)
    sv = np.linalg.svd(a, compute_uv=False)
    smin = sv[-1] if sv.size >= points.shape[0] else 0.0
    if smin <= tol:
        return None, np.inf, smin
    rhs = np.append(x, 1.0)
    t, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    res = float(np.linalg.norm(a @ t - rhs))
    return t, res, smin


def affinely_independent(points, tol: float = TOL) -> bool:
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] <= 1:
        return True
    sv = np.linalg.svd(_augmented(pts), compute_uv=False)
    return sv.size >= pts.shape[0] and sv[-1] > tol


def _smallest_support(points: np.ndarray, tol: float):
    """Exhaustive Caratheodory search by increasing subset size."""
    n, d = points.shape
    for k in range(1, min(n, d + 1) + 1):
        for idx in combinations(range(n), k):
            sub = points[list(idx)]
            t, res, _ = _solve_affine(sub, np.zeros(d), tol)
            if t is None or res > 1e-9 or np.any(t <= tol):
                continue
            t = t / t.sum()
            return list(idx), t
    return None


def _subset_count(n: int, d: int) -> int:
    return sum(comb(n, k) for k in range(1, min(n, d + 1) + 1))


def _nnls_witness(points: np.ndarray, tol: float):
    n, d = points.shape
    rho = max(1.0, float(np.abs(points).max()))
    a = np.vstack([points.T, rho * np.ones(n)])
    b = np.append(np.zeros(d), rho)
    w, res = nnls(a, b)
    if res > 1e-10 or w.sum() <= 0:
        return None
    keep = w > tol
    w = w[keep] / w[keep].sum()
    return list(np.flatnonzero(keep)), w


def zero_in_convex_hull(points, tol: float = TOL) -> Optional[ConvexWitness]:
    """Witness that 0 lies in conv(points), or None.

    The exact subset search returns a witness of smallest cardinality; use
    :func:`separating_direction` for the diagnostic when None is returned.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return None
    n, d = pts.shape
    if _subset_count(n, d) <= MAX_SUBSETS:
        found = _smallest_support(pts, tol)
    else:
        found = _nnls_witness(pts, tol)
    if found is None:
        return None
    idx, w = found
    witness = ConvexWitness(pts[idx], w)
    if witness.residual() >= 1e-8:
        return None
    return witness


def separating_direction(points, steps: int = FRANK_WOLFE_STEPS) -> np.ndarray:
    """Unit direction ``f`` from the nearest point of conv(points) to zero.

    When 0 is not in the hull, ``<f, p> > 0`` for every point.  Computed by
    Frank-Wolfe with exact line search.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    y = pts[np.argmin(np.einsum("ij,ij->i", pts, pts))].copy()
    for _ in range(steps):
        s = pts[np.argmin(pts @ y)]
        diff = y - s
        denom = diff @ diff
        if denom == 0:
            break
        gamma = min(1.0, max(0.0, (y @ diff) / denom))
        if gamma == 0:
            break
        y = y - gamma * diff
    n = np.linalg.norm(y)
    if n == 0:
        return np.zeros(pts.shape[1])
    return y / n


def _pivot_reduce(points: np.ndarray, weights: np.ndarray, tol: float):
    """Classic Caratheodory elimination along affine dependences."""
    pts, w = points.copy(), weights.copy()
    while pts.shape[0] > 1 and not affinely_independent(pts, tol):
        _, _, vt = np.linalg.svd(_augmented(pts))
        mu = vt[-1]
        if not np.any(mu > tol):
            mu = -mu
        pos = mu > tol
        alpha = np.min(w[pos] / mu[pos])
        w = w - alpha * mu
        keep = w > tol
        pts, w = pts[keep], w[keep]
        w = w / w.sum()
    return pts, w


def caratheodory_reduce(witness: ConvexWitness, tol: float = TOL) -> ConvexWitness:
    """Shrink ``witness`` to an affinely independent support of minimum size.

    Raises DegenerateWitness when the rank or positivity decision for the
    chosen support sits within two orders of magnitude of ``tol``.
    """
    pts, w = witness.points, witness.weights
    d = pts.shape[1]
    if _subset_count(pts.shape[0], d) <= MAX_SUBSETS:
        found = _smallest_support(pts, tol)
        if found is None:
            raise DegenerateWitness("witness does not survive the exact subset search")
        idx, t = found
        pts, w = pts[idx], t
    else:
        pts, w = _pivot_reduce(pts, w, tol)
    if pts.shape[0] > 1:
        sv = np.linalg.svd(_augmented(pts), compute_uv=False)
        if sv[-1] < 100 * tol or w.min() < 100 * tol:
            raise DegenerateWitness(
                f"ambiguous rank decision (sigma_min={sv[-1]:.3g}, w_min={w.min():.3g})"
            )
    out = ConvexWitness(pts, w / w.sum())
    if out.residual() >= 1e-8:
        raise DegenerateWitness("reduced witness lost containment")
    return out


def barycentric_coordinates(D0, x, tol: float = TOL) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(D0, dtype=float))
    x = np.asarray(x, dtype=float)
    t, res, _ = _solve_affine(pts, x, tol)
    if t is None:
        raise OutsideHull("points are affinely dependent")
    if res > 1e-9 * max(1.0, np.linalg.norm(x)):
        raise OutsideHull(f"point is off the affine hull (residual {res:.3g})")
    if np.any(t < -tol):
        raise OutsideHull(f"negative barycentric weight {t.min():.3g}")
    return np.clip(t, 0.0, None)


def simplex_inradius(D0) -> float:
    """Radius of the largest ball about 0, inside span(D0), contained in conv(D0)."""
    pts = np.atleast_2d(np.asarray(D0, dtype=float))
    k = pts.shape[0]
    best = np.inf
    for i in range(k):
        facet = np.delete(pts, i, axis=0)
        q0 = facet[0]
        if facet.shape[0] == 1:
            dist = np.linalg.norm(q0)
        else:
            edges = Subspace.span(facet[1:] - q0, pts.shape[1])
            dist = np.linalg.norm(q0 - project(q0, edges))
        best = min(best, dist)
    return float(best)


def minimal_simplex_weights(D0, zero_weights, x) -> np.ndarray:
    """Nonnegative ``w`` with ``w @ D0 = x`` and the smallest total ``sum(w)``.

    The affine family ``lam * t0 + L x`` (``t0`` the barycentric weights of the
    origin) is nonnegative exactly for ``lam`` at least the gauge of ``x``.
    """
    pts = np.atleast_2d(np.asarray(D0, dtype=float))
    t0 = np.asarray(zero_weights, dtype=float)
    a = _augmented(pts)
    lin, *_ = np.linalg.lstsq(a, np.append(np.asarray(x, dtype=float), 0.0), rcond=None)
    ratios = -lin / t0
    lam = max(0.0, float(ratios.max()))
    return np.clip(lam * t0 + lin, 0.0, None)

"""Independent reference implementations used to freeze expected values.

They share no code with the package: exact rational arithmetic, brute-force
enumeration and scipy routines the package does not call.
"""
import math
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull


def _solve_exact(rows, rhs):
    """Solve ``rows @ t = rhs`` over the rationals; None when inconsistent.

    Returns one solution when the system is consistent (free variables 0)
    together with the rank.
    """
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    n = len(rows[0])
    piv_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        piv_cols.append(c)
        r += 1
    for i in range(r, len(m)):
        if m[i][n] != 0:
            return None, r
    t = [Fraction(0)] * n
    for i, c in enumerate(piv_cols):
        t[c] = m[i][n]
    return t, r


def exact_zero_in_hull(points) -> bool:
    """0 in conv(points) by exact search over affinely independent subsets."""
    pts = [[Fraction(int(round(v))) if float(v).is_integer() else Fraction(v) for v in p]
           for p in np.asarray(points, dtype=float)]
    d = len(pts[0])
    for size in range(1, min(len(pts), d + 1) + 1):
        for sub in combinations(pts, size):
            rows = [[p[j] for p in sub] for j in range(d)] + [[Fraction(1)] * size]
            rhs = [Fraction(0)] * d + [Fraction(1)]
            t, rank = _solve_exact(rows, rhs)
            if t is not None and rank == size and all(v >= 0 for v in t):
                return True
    return False


def scipy_origin_ball_radius(simplex) -> float:
    """Radius of the largest ball about 0 inside a full-dimensional simplex,
    read off the facet equations of scipy's ConvexHull."""
    hull = ConvexHull(np.asarray(simplex, dtype=float))
    normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
    return float(np.min(-offsets / np.linalg.norm(normals, axis=1)))


def subset_sums_within(values, x, eps, scale: int) -> bool:
    """Whether some subset of the integers ``values`` has ``|x - sum/scale| < eps``.

    Exact: achievable sums are tracked as a Python integer bitset.
    """
    values = [int(v) for v in values]
    offset = -sum(v for v in values if v < 0)
    bits = 1 << offset
    for v in values:
        bits |= (bits << v) if v >= 0 else (bits >> -v)
    lo = math.floor((x - eps) * scale) + offset
    hi = math.ceil((x + eps) * scale) + offset
    for s in range(max(lo, 0), hi + 1):
        if (bits >> s) & 1 and abs(x - (s - offset) / scale) < eps:
            return True
    return False

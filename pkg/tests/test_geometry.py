import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levysteinitz.exceptions import OutsideHull
from levysteinitz.geometry import (
    ConvexWitness,
    Subspace,
    affinely_independent,
    barycentric_coordinates,
    caratheodory_reduce,
    minimal_simplex_weights,
    separating_direction,
    simplex_inradius,
    zero_in_convex_hull,
)

from oracles import exact_zero_in_hull, scipy_origin_ball_radius

small_ints = st.integers(-3, 3)


def point_sets(max_dim=4, max_points=7):
    return st.integers(1, max_dim).flatmap(
        lambda d: st.lists(st.lists(small_ints, min_size=d, max_size=d), min_size=1, max_size=max_points))


class TestSubspace:
    def test_span_is_orthonormal(self):
        s = Subspace.span([[1, 1, 0], [2, 2, 0], [0, 0, 3]], 3)
        assert s.dim == 2
        assert np.allclose(s.basis @ s.basis.T, np.eye(2))

    def test_complement_and_projection(self):
        s = Subspace.span([[1, 0, 0]], 3)
        c = s.complement()
        assert c.dim == 2
        v = np.array([3.0, -1.0, 2.0])
        assert np.allclose(s.project(v) + c.project(v), v)
        assert c.contains([0, 5, 1]) and not c.contains([1, 0, 0])

    def test_complement_within(self):
        outer = Subspace.span([[1, 0, 0], [0, 1, 0]], 3)
        inner = Subspace.span([[1, 1, 0]], 3)
        c = inner.complement_within(outer)
        assert c.same_as(Subspace.span([[1, -1, 0]], 3))

    def test_sum_and_same_as(self):
        a = Subspace.span([[1, 0]], 2)
        b = Subspace.span([[1, 1]], 2)
        assert (a + b).same_as(Subspace.full(2))
        assert not a.same_as(b)
        assert Subspace.zero(2).dim == 0


class TestHull:
    @pytest.mark.parametrize("pts,inside", [
        ([[1, 0], [-1, 0]], True),
        ([[1, 0], [0, 1]], False),
        ([[1, 1], [-1, 0], [0, -1]], True),
        ([[1, 0], [0, 1], [1, 1]], False),
        ([[2, 0, 0], [-1, 1, 0], [-1, -1, 0], [0, 0, 1]], True),
    ])
    def test_known_sets(self, pts, inside):
        w = zero_in_convex_hull(pts)
        assert (w is not None) == inside == exact_zero_in_hull(pts)

    @settings(max_examples=150, deadline=None)
    @given(point_sets())
    def test_agrees_with_exact_oracle(self, pts):
        pts = np.array(pts, dtype=float)
        pts = pts[np.linalg.norm(pts, axis=1) > 0]
        if len(pts) == 0:
            return
        w = zero_in_convex_hull(pts)
        assert (w is not None) == exact_zero_in_hull(pts)
        if w is not None:
            assert w.residual() < 1e-9
            assert affinely_independent(w.points)

    @settings(max_examples=100, deadline=None)
    @given(point_sets())
    def test_separating_direction_when_outside(self, pts):
        pts = np.array(pts, dtype=float)
        pts = pts[np.linalg.norm(pts, axis=1) > 0]
        if len(pts) == 0 or zero_in_convex_hull(pts) is not None:
            return
        f = separating_direction(pts)
        assert np.isclose(np.linalg.norm(f), 1.0)
        assert np.all(pts @ f > 0)

    def test_witness_validation(self):
        with pytest.raises(ValueError):
            ConvexWitness([[1.0], [-1.0]], [0.7, 0.7])
        with pytest.raises(ValueError):
            ConvexWitness([[1.0], [-1.0]], [1.0, 0.0])


class TestCaratheodory:
    def test_reduces_to_minimal_support(self):
        pts = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1]], dtype=float)
        red = caratheodory_reduce(ConvexWitness(pts, np.full(5, 0.2) + np.array([0, 0, 0.05, 0, -0.05])))
        assert red.size == 2
        assert red.residual() < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
    def test_minimal_on_random_sets(self, d, seed):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((d + 3, d))
        pts = np.vstack([pts, -pts[:3].mean(axis=0, keepdims=True)])
        red = caratheodory_reduce(zero_in_convex_hull(pts))
        assert affinely_independent(red.points)
        for i in range(red.size):
            if red.size > 1:
                assert zero_in_convex_hull(np.delete(red.points, i, axis=0)) is None


class TestSimplex:
    def test_equilateral_triangle(self):
        tri = [[1, 0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]]
        # centred equilateral triangle with unit circumradius: inradius 1/2
        assert simplex_inradius(tri) == pytest.approx(0.5)
        assert simplex_inradius(tri) == pytest.approx(scipy_origin_ball_radius(tri))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
    def test_origin_ball_matches_scipy(self, d, seed):
        rng = np.random.default_rng(seed)
        w = rng.dirichlet(np.ones(d + 1))
        pts = rng.standard_normal((d + 1, d))
        pts = pts - w @ pts
        if np.linalg.svd(np.vstack([pts.T, np.ones(d + 1)]), compute_uv=False)[-1] < 1e-3:
            return
        assert simplex_inradius(pts) == pytest.approx(scipy_origin_ball_radius(pts), rel=1e-7)

    def test_segment(self):
        assert simplex_inradius([[2.0], [-0.5]]) == pytest.approx(0.5)

    def test_barycentric(self):
        tri = np.array([[1, 0], [0, 1], [-1, -1]], dtype=float)
        t = barycentric_coordinates(tri, [0.2, 0.1])
        assert np.allclose(t @ tri, [0.2, 0.1]) and np.isclose(t.sum(), 1)
        with pytest.raises(OutsideHull):
            barycentric_coordinates(tri, [2.0, 2.0])

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_minimal_weights(self, a, b):
        tri = np.array([[1, 0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]])
        t0 = np.full(3, 1 / 3)
        x = np.array([a, b])
        w = minimal_simplex_weights(tri, t0, x)
        assert np.all(w >= 0)
        assert np.allclose(w @ tri, x, atol=1e-9)
        # one weight vanishes at the minimum (or x = 0)
        assert w.min() < 1e-9
        # the total is the gauge of x: at most |x| / inradius
        assert w.sum() <= np.linalg.norm(x) / 0.5 + 1e-9

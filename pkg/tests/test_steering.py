import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levysteinitz.exceptions import DegenerateContext, PoolExhausted, TargetOutsideX0
from levysteinitz.geometry import ConvexWitness, caratheodory_reduce, zero_in_convex_hull
from levysteinitz.series import builtin_family
from levysteinitz.steering import (
    ListPool,
    build_omega,
    build_steering_context,
    greedy_cone_fill,
    steer,
)

TRI = np.array([[1.0, 0.0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]])


def ctx_pm1():
    return build_steering_context(ConvexWitness([[1.0], [-1.0]], [0.5, 0.5]))


def ctx_triangle():
    return build_steering_context(ConvexWitness(TRI, np.full(3, 1 / 3)))


class TestContext:
    def test_pm1_constants(self):
        c = ctx_pm1()
        # 0.9 * min(1/4, 1, 1) ; 2 * (1 + delta) ; C_delta / delta
        assert c.delta == pytest.approx(0.225)
        assert c.C_delta == pytest.approx(2.45)
        assert c.C == pytest.approx(2.45 / 0.225)

    def test_triangle_constants(self):
        c = ctx_triangle()
        assert c.delta == pytest.approx(0.225)
        assert c.C_delta == pytest.approx(3 * 1.225)
        assert c.X1.dim == 0 and c.X0.dim == 2
        assert c.ball_inside_hull() and c.cones_disjoint()

    def test_embedded_segment_has_complement(self):
        c = build_steering_context(ConvexWitness([[0.0, 1.0], [0.0, -1.0]], [0.5, 0.5]))
        assert c.X1.dim == 1 and c.X1.contains([1.0, 0.0])

    def test_degenerate(self):
        with pytest.raises(DegenerateContext):
            build_steering_context(ConvexWitness([[1.0]], [1.0]))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-4, 4), st.floats(-4, 4))
    def test_weights_reproduce_target(self, a, b):
        c = ctx_triangle()
        w = c.weights([a, b])
        assert np.all(w >= 0) and w.min() < 1e-9
        assert np.allclose(w @ c.D0, [a, b], atol=1e-9)
        assert w.sum() <= np.hypot(a, b) / c.delta + 1e-9


class TestGreedy:
    def test_fill_lands_in_window(self):
        c = ctx_pm1()
        pool = [(n, [1.0 / n]) for n in range(1, 200)]
        ids, total = greedy_cone_fill(c, 0, pool, 2.0, 0.01)
        assert 2.0 - 0.01 < total[0] <= 2.0
        assert ids == sorted(ids)

    def test_skips_other_cone_and_forbidden(self):
        c = ctx_pm1()
        pool = [(1, [1.0]), (2, [-1.0]), (3, [0.5]), (4, [0.25])]
        ids, _ = greedy_cone_fill(c, 0, pool, 0.8, 0.1, forbidden={1})
        assert ids == [3, 4]

    def test_exhausted(self):
        c = ctx_pm1()
        with pytest.raises(PoolExhausted):
            greedy_cone_fill(c, 0, [(1, [0.1])], 1.0, 0.01)


class TestSteer:
    def test_triangle_list_pool(self):
        c = ctx_triangle()
        n = 30_000
        # exact cone directions: the cap radius shrinks with eps
        vecs = TRI[np.arange(n) % 3] / (1 + np.arange(n) // 3)[:, None]
        pool = ListPool(range(1, n + 1), vecs)
        x = np.array([0.7, -1.1])
        res = steer(c, pool, x, 1e-3)
        assert np.linalg.norm(x - res.total) < 1e-3
        assert len(set(res.indices)) == len(res.indices)
        # consumed indices are not offered again
        res2 = steer(c, pool, x, 1e-2)
        assert not set(res.indices) & set(res2.indices)

    def test_target_outside_span(self):
        c = build_steering_context(ConvexWitness([[0.0, 1.0], [0.0, -1.0]], [0.5, 0.5]))
        with pytest.raises(TargetOutsideX0):
            steer(c, ListPool([1], [[0.0, 1.0]]), [1.0, 0.0], 0.1)

    def test_small_target_needs_nothing(self):
        res = steer(ctx_pm1(), ListPool([1], [[1.0]]), [1e-4], 1e-3)
        assert res.indices == []

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            steer(ctx_pm1(), ListPool([1], [[1.0]]), [0.5], 0.0)


@pytest.fixture(scope="module")
def omega():
    s = builtin_family("alt_harmonic_geometric")
    wit = caratheodory_reduce(zero_in_convex_hull([[1.0, 0.0], [-1.0, 0.0]]))
    ctx = build_steering_context(wit, dim=2)
    return build_omega(s, ctx, schedule=3, scan_budget=1_000_000)


class TestOmega:
    def test_block_invariants(self, omega):
        for zi, z in enumerate(omega.ctx.D0):
            assert [b.k for b in omega.blocks[zi][:3]] == [1, 2, 3]
            for b in omega.blocks[zi]:
                assert b.k < b.mass < b.k + 1
                units = omega.terms.unit[np.array(b.indices) - 1]
                assert np.all(np.linalg.norm(units - z, axis=1) < 2.0 ** -b.k)

    def test_blocks_are_disjoint(self, omega):
        seen = [n for c in omega.claimed for n in c.tolist()]
        assert len(seen) == len(set(seen))

    def test_history_within_bound(self, omega):
        assert omega.max_bound_ratio < 1
        assert all(mass < bound for _, mass, bound in omega.history)

    def test_membership(self, omega):
        first = omega.blocks[0][0].indices[0]
        assert omega.contains(first)
        with pytest.raises(ValueError):
            omega.mark_used([n for n in range(1, 50) if not omega.contains(n)][:2])

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levysteinitz.exceptions import NotRearrangeable
from levysteinitz.scalar import (
    RiemannStream,
    ScalarSeries,
    Verdict,
    classify_scalar,
    riemann_rearrange,
    signed_part_sums,
    take,
)
from levysteinitz.series import builtin_family

ALT = ScalarSeries.from_function(lambda n: (-1.0) ** (n + 1) / n)
HARMONIC = ScalarSeries.from_function(lambda n: 1.0 / n)
NEG_HARMONIC = ScalarSeries.from_function(lambda n: -1.0 / n)
GEOM = ScalarSeries.from_function(lambda n: 0.5 ** n)


class TestClassify:
    def test_prefix_verdicts(self):
        assert classify_scalar(ALT, N=100_000, M=5).verdict is Verdict.ANY_REAL
        h = classify_scalar(HARMONIC, N=100_000, M=5)
        assert h.verdict is Verdict.DIVERGES and h.sign == 1
        assert classify_scalar(NEG_HARMONIC, N=100_000, M=5).sign == -1
        g = classify_scalar(GEOM, N=1000)
        assert g.verdict is Verdict.ABSOLUTE and g.value == pytest.approx(1.0)

    def test_nonvanishing_terms_diverge(self):
        ones = ScalarSeries.from_function(lambda n: np.ones(n.size))
        c = classify_scalar(ones, N=1000)
        assert c.verdict is Verdict.DIVERGES and c.sign == 1
        alt_ones = ScalarSeries.from_function(lambda n: (-1.0) ** n)
        assert classify_scalar(alt_ones, N=1000).sign == 0

    def test_short_prefix_is_inconclusive(self):
        assert classify_scalar(ALT, N=1000, M=100).verdict is Verdict.INCONCLUSIVE

    def test_certificate_overrides_prefix(self):
        s = ScalarSeries.from_function(lambda n: (-1.0) ** n / n, certificate="any")
        c = classify_scalar(s, N=10)
        assert c.verdict is Verdict.ANY_REAL and c.evidence["source"] == "certificate"
        with pytest.raises(ValueError):
            ScalarSeries.from_function(lambda n: n, certificate="maybe")

    def test_from_stream_reads_certificate(self):
        s = builtin_family("alt_harmonic_geometric")
        assert ScalarSeries.from_stream(s, [1, 0]).certificate == "any"
        assert ScalarSeries.from_stream(s, [0, 1]).certificate == "absolute"
        p = builtin_family("positive_harmonic_dir", {"u": (1, 0)})
        assert ScalarSeries.from_stream(p, [-1, 0]).certificate == "-"

    def test_str(self):
        assert str(classify_scalar(HARMONIC, N=100_000)) == "DivergesAllRearrangements(+)"

    def test_signed_part_sums(self):
        pos, neg, tail = signed_part_sums(ScalarSeries.from_array([1, -2, 3, -4]), 4)
        assert (pos, neg, tail) == (4.0, -6.0, 4.0)


class TestRiemann:
    @pytest.mark.parametrize("target", [math.log(2), 0.0, -1.0, 2.5])
    def test_converges(self, target):
        r = riemann_rearrange(ALT, target, classify_scalar(ALT, N=100_000))
        take(r, 20_000)
        assert abs(r.partial - target) < 1e-3

    def test_error_bounded_by_crossing_term(self):
        r = RiemannStream(ALT, 0.3)
        take(r, 5000)
        assert all(err <= term + 1e-15 for _, err, term in r.crossing_errors)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-2, 2, allow_nan=False), st.integers(100, 3000))
    def test_is_injective_and_fair(self, target, k):
        r = RiemannStream(ALT, target)
        out = take(r, k)
        assert len(set(out)) == k
        missing = sorted(set(range(1, max(out) + 2)) - set(out))
        assert r.frontier == missing[0]

    def test_absolute_series(self):
        c = classify_scalar(GEOM, N=1000)
        r = riemann_rearrange(GEOM, 1.0, c)
        assert take(r, 5) == [1, 2, 3, 4, 5]
        with pytest.raises(NotRearrangeable):
            riemann_rearrange(GEOM, 0.5, c)

    def test_rejections(self):
        with pytest.raises(NotRearrangeable):
            riemann_rearrange(HARMONIC, 1.0, classify_scalar(HARMONIC, N=100_000))
        with pytest.raises(NotRearrangeable):
            riemann_rearrange(ALT, 1.0, classify_scalar(ALT, N=1000, M=100))
        r = riemann_rearrange(ALT, 1.0, classify_scalar(ALT, N=1000, M=100), force=True)
        take(r, 10)

    def test_one_sided_tail_falls_back_to_index_order(self):
        s = ScalarSeries.from_array([1.0, 2.0, -0.5])
        r = RiemannStream(s, 0.0, scan_budget=10_000)
        out = take(r, 6)
        assert sorted(out[:3]) == [1, 2, 3] and out[3:] == [4, 5, 6]
        assert r.exhausted

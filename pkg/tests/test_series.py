import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from levysteinitz.exceptions import BadParams, CertificateError, ParseError, UnknownFamily, ZeroTermRejected
from levysteinitz.geometry import Subspace
from levysteinitz.series import (
    IndexMap,
    SeriesSpec,
    StructureCertificate,
    builtin_family,
    canonical_family,
    cross_check_certificate,
    load_spec,
    serialize_spec,
)


class TestFamilies:
    def test_alternating_harmonic_terms(self):
        s = builtin_family("alternating_harmonic_dir", {"u": (0, 1)})
        x = s.term_range(1, 5)
        assert np.allclose(x, [[0, -1], [0, 0.5], [0, -1 / 3], [0, 0.25]])
        cert = s.certificate
        assert {tuple(np.round(d, 12)) for d in cert.divergence_directions} == {(0.0, 1.0), (0.0, -1.0)}
        assert cert.gamma(2).same_as(Subspace.span([[1, 0]], 2))

    def test_positive_harmonic(self):
        s = builtin_family("positive_harmonic", {"u": (1,)})
        assert s.dim == 1
        assert np.allclose(s.term_range(1, 4).ravel(), [1, 0.5, 1 / 3])
        assert s.certificate.divergence_directions.shape == (1, 1)

    def test_geometric_absolute(self):
        s = builtin_family("geometric", {"r": (0.5, -0.25)})
        assert np.allclose(s.term_at(2), [0.25, 0.0625])
        assert s.certificate.absolutely_convergent
        with pytest.raises(BadParams):
            builtin_family("geometric", {"r": (1.0,)})
        with pytest.raises(ZeroTermRejected):
            builtin_family("geometric", {"r": (0.0, 0.0)})

    def test_interleaved(self):
        a = SeriesSpec("alternating_harmonic_dir", {"u": (1, 0)})
        b = SeriesSpec("geometric", {"r": (0.5, 0.5)})
        s = builtin_family("interleave", {"first": a, "second": b})
        x = s.term_range(1, 5)
        assert np.allclose(x[0], [-1, 0]) and np.allclose(x[1], [0.5, 0.5])
        assert np.allclose(x[2], [0.5, 0]) and np.allclose(x[3], [0.25, 0.25])

    def test_custom_table_strips_zero_rows(self):
        s = builtin_family("table", {"rows": ((1, 0), (0, 0), (-1, 1))})
        assert np.allclose(s.term_range(1, 5), [[1, 0], [-1, 1], [0.5, 0], [-0.5, 0.5]])
        orig = s.original_terms([1, 2, 3, 4])
        assert np.allclose(orig, [[1, 0], [0, 0], [-1, 1], [0.5, 0]])
        with pytest.raises(ZeroTermRejected):
            builtin_family("table", {"rows": ((0, 0),)})

    def test_unknown_family(self):
        with pytest.raises(UnknownFamily):
            builtin_family("nope")
        assert canonical_family("alt_harmonic") == "alternating_harmonic_dir"

    def test_indices_start_at_one(self):
        with pytest.raises(IndexError):
            builtin_family("geometric", {"r": (0.5,)}).terms([0])


class TestIndexMap:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=8).filter(any), st.integers(1, 200))
    def test_round_trip(self, mask, n):
        nz = [i for i, b in enumerate(mask) if b]
        im = IndexMap(len(mask), nz)
        m = int(im.to_original(n))
        assert int(im.from_original(m)) == n
        assert im.attached(n)[-1] == m

    def test_zero_positions_map_to_zero(self):
        im = IndexMap(3, [0, 2])
        assert int(im.from_original(2)) == 0
        assert im.attached(2) == [2, 3]


class TestDerived:
    def test_transformed_rotates_terms_and_certificate(self):
        s = builtin_family("alt_harmonic_geometric")
        q = np.array([[0.0, -1.0], [1.0, 0.0]])
        t = s.transformed(q)
        assert np.allclose(t.term_range(1, 10), s.term_range(1, 10) @ q.T)
        dirs = {tuple(np.round(d, 12)) for d in t.certificate.divergence_directions}
        assert dirs == {(0.0, 1.0), (0.0, -1.0)}

    def test_perturbed(self):
        s = builtin_family("alternating_harmonic_dir", {"u": (1, 0)})
        p = s.perturbed(3, [0, 1])
        assert np.allclose(p.term_at(3), [-1 / 3, 1])
        assert np.allclose(p.term_at(4), s.term_at(4))
        with pytest.raises(ZeroTermRejected):
            s.perturbed(1, [1, 0])

    def test_scaled(self):
        s = builtin_family("geometric", {"r": (0.5,)})
        assert np.allclose(s.scaled(2).term_at(1), [1.0])
        with pytest.raises(BadParams):
            s.scaled(0)

    def test_certificate_on_subspace(self):
        s = builtin_family("alt_harmonic_geometric")
        line = Subspace.span([[0, 1]], 2)
        cert = s.certificate_on(line)
        assert cert.absolutely_convergent

    def test_certificate_validation(self):
        with pytest.raises(CertificateError):
            StructureCertificate(np.array([[2.0, 0.0]]), np.zeros((0, 2)))
        with pytest.raises(CertificateError):
            StructureCertificate(np.array([[1.0, 0.0]]), np.zeros((0, 2)), absolutely_convergent=True)

    def test_cross_check(self):
        s = builtin_family("alt_harmonic_geometric")
        report = cross_check_certificate(s, N=10_000)
        assert report["sums"][0] < report["bound"]
        bad = s.with_certificate(StructureCertificate(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]])))
        with pytest.raises(CertificateError):
            cross_check_certificate(bad, N=10_000)


class TestSpecFiles:
    def test_parse_and_round_trip(self):
        text = """
        # comment
        family = interleave
        first.family = alt_harmonic
        first.u = 1, 0
        second.family = geometric
        second.r = 1/2, -0.25
        """
        spec = load_spec(text)
        assert spec.family == "interleaved_sum"
        assert spec.params["second"].params["r"] == (Fraction(1, 2), -0.25)
        again = load_spec(serialize_spec(spec))
        assert again == spec

    def test_table_and_certificate(self):
        spec = load_spec("family = table\nrows = 1,0; 0,0; -1,1\npower = 1\n"
                         "certificate.directions = 1,0; -1,1\ncertificate.gamma = none\n")
        cert = spec.certificate
        assert np.allclose(np.linalg.norm(cert.divergence_directions, axis=1), 1)
        assert load_spec(serialize_spec(spec)) == spec

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-0.99, 0.99, allow_nan=False).filter(lambda r: r != 0), min_size=1, max_size=4))
    def test_geometric_round_trip(self, rs):
        spec = SeriesSpec("geometric", {"r": tuple(rs)})
        back = load_spec(serialize_spec(spec))
        assert back == spec
        assert np.array_equal(back.build().term_range(1, 5), spec.build().term_range(1, 5))

    @pytest.mark.parametrize("text,line,field", [
        ("family = geometric\nr = abc,1\n", 2, "r"),
        ("family = geometric\nr = 0.5\nr = 0.2\n", 3, "r"),
        ("r = 0.5\n", None, "family"),
        ("family = geometric\nfoo bar\n", 2, None),
    ])
    def test_parse_errors_carry_location(self, text, line, field):
        with pytest.raises(ParseError) as info:
            load_spec(text)
        assert info.value.line == line
        assert info.value.field == field

    def test_bad_params_surface(self):
        with pytest.raises(BadParams):
            load_spec("family = geometric\nr = 2\n")

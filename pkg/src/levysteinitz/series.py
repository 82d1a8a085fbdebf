"""Lazy vector series, built-in families and structure certificates.

A :class:`TermStream` is a deterministic map ``n -> x_n`` (1-based) that is
evaluated in vectorised batches.  Terms are never zero: families that could
emit a zero are rejected when built, and ``custom_table`` strips zero rows
while keeping an index map back to the user's numbering.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    BadParams,
    CertificateError,
    ParseError,
    UnknownFamily,
    ZeroTermRejected,
)
from .geometry import MAX_DIM, Subspace, as_vector

FAMILIES = (
    "alternating_harmonic_dir",
    "geometric",
    "interleaved_sum",
    "positive_harmonic_dir",
    "custom_table",
    "alt_harmonic_geometric",
)
ALIASES = {
    "alt_harmonic": "alternating_harmonic_dir",
    "positive_harmonic": "positive_harmonic_dir",
    "interleave": "interleaved_sum",
    "table": "custom_table",
}


@dataclass(frozen=True)
class StructureCertificate:
    """Declared divergence directions ``D`` and a basis of ``Gamma``."""

    divergence_directions: np.ndarray
    gamma_basis: np.ndarray
    absolutely_convergent: bool = False

    def __post_init__(self):
        dirs = np.array(self.divergence_directions, dtype=float)
        gam = np.array(self.gamma_basis, dtype=float)
        dim = dirs.shape[-1] if dirs.size else (gam.shape[-1] if gam.size else 0)
        dirs = dirs.reshape(-1, dim) if dim else dirs.reshape(0, 0)
        gam = gam.reshape(-1, dim) if dim else gam.reshape(0, 0)
        if dirs.size and np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > 1e-12):
            raise CertificateError("declared divergence directions must be unit vectors")
        if self.absolutely_convergent and dirs.shape[0]:
            raise CertificateError("absolutely convergent series have no divergence directions")
        dirs.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "divergence_directions", dirs)
        object.__setattr__(self, "gamma_basis", gam)

    def gamma(self, dim: int) -> Subspace:
        if self.gamma_basis.size == 0:
            return Subspace.zero(dim)
        return Subspace.span(self.gamma_basis, dim)

    def transformed(self, q: np.ndarray) -> "StructureCertificate":
        dirs = self.divergence_directions @ q.T if self.divergence_directions.size else self.divergence_directions
        gam = self.gamma_basis @ q.T if self.gamma_basis.size else self.gamma_basis
        if dirs.size:
            dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        return StructureCertificate(dirs, gam, self.absolutely_convergent)


def _certificate_from_rays(rays: np.ndarray, space: Subspace) -> StructureCertificate:
    """Exact certificate of ``pr_space(x_n)`` for a ray family.

    Ray families have ``x_n = w_n r_j(n) + (absolutely summable)`` with every
    ray's weight sequence positive and non-summable.
    """
    d = space.ambient_dim
    dirs = []
    projected = []
    for r in rays:
        w = space.project(r)
        if np.linalg.norm(w) > 1e-9 * np.linalg.norm(r):
            projected.append(w)
            u = w / np.linalg.norm(w)
            if not any(np.linalg.norm(u - v) < 1e-9 for v in dirs):
                dirs.append(u)
    spanned = Subspace.span(projected, d) if projected else Subspace.zero(d)
    gamma = spanned.complement_within(space)
    return StructureCertificate(
        np.array(dirs).reshape(-1, d), gamma.basis, absolutely_convergent=not dirs
    )


class IndexMap:
    """Monotone map from stripped (nonzero) indices back to original ones."""

    def __init__(self, period: int, nonzero_positions):
        self.period = period
        self.nonzero = np.asarray(nonzero_positions, dtype=np.int64)
        self._inverse = np.zeros(period, dtype=np.int64)
        self._inverse[self.nonzero] = np.arange(1, self.nonzero.size + 1)

    def to_original(self, n):
        n = np.asarray(n, dtype=np.int64)
        k = self.nonzero.size
        block, pos = np.divmod(n - 1, k)
        return block * self.period + self.nonzero[pos] + 1

    def from_original(self, m):
        """Stripped index for original ``m``; 0 where the original term is zero."""
        m = np.asarray(m, dtype=np.int64)
        block, pos = np.divmod(m - 1, self.period)
        inner = self._inverse[pos]
        return np.where(inner > 0, block * self.nonzero.size + inner, 0)

    def attached(self, n: int) -> list:
        """Original indices owned by stripped index ``n`` (zeros first, then n)."""
        hi = int(self.to_original(n))
        lo = int(self.to_original(n - 1)) if n > 1 else 0
        return list(range(lo + 1, hi + 1))


class TermStream:
    """Deterministic infinite sequence of nonzero vectors ``x_1, x_2, ...``."""

    def __init__(
        self,
        dim: int,
        batch: Callable[[np.ndarray], np.ndarray],
        description: str = "",
        certificate: Optional[StructureCertificate] = None,
        rays: Optional[np.ndarray] = None,
        gamma_bound: Optional[float] = None,
        index_map: Optional[IndexMap] = None,
    ):
        if not 1 <= dim <= MAX_DIM:
            raise BadParams(f"dimension must be in 1..{MAX_DIM}")
        self.dim = dim
        self._batch = batch
        self.description = description
        self.rays = None if rays is None else np.array(rays, dtype=float).reshape(-1, dim)
        if certificate is None and self.rays is not None:
            certificate = _certificate_from_rays(self.rays, Subspace.full(dim))
        self.certificate = certificate
        self.gamma_bound = gamma_bound
        self.index_map = index_map

    def __repr__(self):
        return f"TermStream(dim={self.dim}, {self.description!r})"

    def terms(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        if idx.size and idx.min() < 1:
            raise IndexError("term indices start at 1")
        out = np.asarray(self._batch(idx), dtype=float).reshape(idx.size, self.dim)
        return out

    def term_range(self, start: int, stop: int) -> np.ndarray:
        """Terms ``x_start .. x_{stop-1}``."""
        return self.terms(np.arange(start, stop, dtype=np.int64))

    def term_at(self, n: int) -> np.ndarray:
        return self.terms([n])[0]

    def original_terms(self, m) -> np.ndarray:
        """Terms in the user's numbering (zeros included)."""
        if self.index_map is None:
            return self.terms(m)
        inner = self.index_map.from_original(m)
        out = np.zeros((inner.size, self.dim))
        nz = inner > 0
        if np.any(nz):
            out[nz] = self.terms(inner[nz])
        return out

    def certificate_on(self, space: Subspace) -> Optional[StructureCertificate]:
        """Certificate of the projected series ``pr_space(x_n)`` when derivable."""
        full = space.dim == self.dim
        if self.rays is not None and (full is False or self.certificate is None):
            return _certificate_from_rays(self.rays, space)
        cert = self.certificate
        if cert is None:
            return None
        if full:
            return cert
        if cert.absolutely_convergent:
            return StructureCertificate(np.zeros((0, self.dim)), space.basis, True)
        gamma = cert.gamma(self.dim)
        if all(gamma.contains(b) for b in space.basis):
            return StructureCertificate(np.zeros((0, self.dim)), space.basis, True)
        return None

    # -- derived streams -------------------------------------------------

    def transformed(self, q) -> "TermStream":
        q = np.asarray(q, dtype=float)
        cert = None
        if self.certificate is not None and self.rays is None:
            cert = self.certificate.transformed(q)
        return TermStream(
            self.dim,
            lambda n: self._batch(n) @ q.T,
            f"Q*({self.description})",
            certificate=cert,
            rays=None if self.rays is None else self.rays @ q.T,
            gamma_bound=self.gamma_bound,
            index_map=self.index_map,
        )

    def scaled(self, lam: float) -> "TermStream":
        if lam <= 0:
            raise BadParams("scale must be positive")
        return TermStream(
            self.dim,
            lambda n: lam * self._batch(n),
            f"{lam}*({self.description})",
            certificate=self.certificate if self.rays is None else None,
            rays=self.rays,
            gamma_bound=None if self.gamma_bound is None else lam * self.gamma_bound,
            index_map=self.index_map,
        )

    def perturbed(self, index: int, v) -> "TermStream":
        """Same series with ``x_index`` replaced by ``x_index + v``."""
        v = as_vector(v, self.dim)
        if np.linalg.norm(self.term_at(index) + v) == 0:
            raise ZeroTermRejected(f"perturbation makes x_{index} zero")

        def batch(n, base=self._batch):
            out = np.array(base(n), dtype=float)
            out[n == index] += v
            return out

        return TermStream(
            self.dim,
            batch,
            f"({self.description}) + v*[n={index}]",
            certificate=self.certificate if self.rays is None else None,
            rays=self.rays,
            index_map=self.index_map,
        )

    def with_certificate(self, cert: StructureCertificate) -> "TermStream":
        if cert.divergence_directions.size and cert.divergence_directions.shape[1] != self.dim:
            raise CertificateError("certificate dimension does not match the stream")
        return TermStream(
            self.dim, self._batch, self.description, certificate=cert,
            rays=None, gamma_bound=self.gamma_bound, index_map=self.index_map,
        )


def prefix(stream: TermStream, N: int) -> list:
    if N < 0:
        raise ValueError("N must be nonnegative")
    return list(stream.term_range(1, N + 1))


# -- built-in families -----------------------------------------------------

def _signs(n):
    return np.where(n % 2 == 0, 1.0, -1.0)


def _direction_param(params, key="u"):
    if key in params:
        u = np.array(_as_floats(params[key], key), dtype=float).reshape(-1)
    else:
        dim = int(params.get("dim", 1))
        if not 1 <= dim <= MAX_DIM:
            raise BadParams(f"dim must be in 1..{MAX_DIM}")
        u = np.zeros(dim)
        u[0] = 1.0
    if u.size > MAX_DIM:
        raise BadParams(f"dimension must be at most {MAX_DIM}")
    if not np.all(np.isfinite(u)):
        raise BadParams(f"{key} must be finite")
    if np.linalg.norm(u) == 0:
        raise ZeroTermRejected(f"{key} = 0 makes every term zero")
    return u


def _as_floats(value, key):
    try:
        if isinstance(value, (list, tuple)):
            return [float(v) for v in value]
        return [float(value)]
    except (TypeError, ValueError):
        raise BadParams(f"{key} must be numeric")


def _alternating_harmonic_dir(params):
    u = _direction_param(params)
    return TermStream(
        u.size,
        lambda n: np.outer(_signs(n) / n, u),
        f"alternating_harmonic_dir(u={u.tolist()})",
        rays=np.array([u, -u]),
        gamma_bound=1e-9,
    )


def _positive_harmonic_dir(params):
    u = _direction_param(params)
    return TermStream(
        u.size,
        lambda n: np.outer(1.0 / n, u),
        f"positive_harmonic_dir(u={u.tolist()})",
        rays=np.array([u]),
        gamma_bound=1e-9,
    )


def _geometric(params):
    if "r" not in params:
        raise BadParams("geometric needs r")
    r = np.array(_as_floats(params["r"], "r"))
    if r.size > MAX_DIM:
        raise BadParams(f"dimension must be at most {MAX_DIM}")
    if np.any(np.abs(r) >= 1):
        raise BadParams("geometric ratios must satisfy |r| < 1")
    if np.all(r == 0):
        raise ZeroTermRejected("all ratios zero gives zero terms")
    a = np.abs(r)
    return TermStream(
        r.size,
        lambda n: np.power(r[None, :], n[:, None].astype(float)),
        f"geometric(r={r.tolist()})",
        rays=np.zeros((0, r.size)),
        gamma_bound=float(np.sum(a / (1 - a))) + 1e-9,
    )


def _alt_harmonic_geometric(params):
    r = float(params.get("r", 0.5))
    if not 0 < abs(r) < 1:
        raise BadParams("r must satisfy 0 < |r| < 1")

    def batch(n):
        out = np.empty((n.size, 2))
        out[:, 0] = _signs(n) / n
        out[:, 1] = np.power(r, n.astype(float))
        return out

    return TermStream(
        2,
        batch,
        f"alt_harmonic_geometric(r={r})",
        rays=np.array([[1.0, 0.0], [-1.0, 0.0]]),
        gamma_bound=abs(r) / (1 - abs(r)) + 1e-9,
    )


def _interleaved_sum(params):
    try:
        first, second = params["first"], params["second"]
    except KeyError:
        raise BadParams("interleaved_sum needs first and second")
    a = first.build() if isinstance(first, SeriesSpec) else first
    b = second.build() if isinstance(second, SeriesSpec) else second
    if a.dim != b.dim:
        raise BadParams("interleaved streams must share a dimension")
    if a.index_map is not None or b.index_map is not None:
        raise BadParams("interleaving zero-stripped tables is not supported")

    def batch(n):
        out = np.empty((n.size, a.dim))
        odd = n % 2 == 1
        out[odd] = a.terms((n[odd] + 1) // 2)
        out[~odd] = b.terms(n[~odd] // 2)
        return out

    rays = None
    if a.rays is not None and b.rays is not None:
        rays = np.vstack([a.rays, b.rays])
    cert = None
    if rays is None and a.certificate is not None and b.certificate is not None:
        ca, cb = a.certificate, b.certificate
        dirs = np.vstack([ca.divergence_directions.reshape(-1, a.dim),
                          cb.divergence_directions.reshape(-1, a.dim)])
        ga = ca.gamma(a.dim)
        gamma = ga.complement() + cb.gamma(a.dim).complement()
        cert = StructureCertificate(
            dirs, gamma.complement().basis,
            ca.absolutely_convergent and cb.absolutely_convergent,
        )
    bound = None
    if a.gamma_bound is not None and b.gamma_bound is not None:
        bound = a.gamma_bound + b.gamma_bound
    return TermStream(
        a.dim, batch, f"interleave({a.description}, {b.description})",
        certificate=cert, rays=rays, gamma_bound=bound,
    )


def _custom_table(params):
    if "rows" not in params:
        raise BadParams("custom_table needs rows")
    rows = params["rows"]
    if rows and not isinstance(rows[0], (list, tuple)):
        rows = [rows]
    try:
        table = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except (TypeError, ValueError):
        raise BadParams("rows must be numeric vectors of equal length")
    if table.ndim != 2 or table.shape[0] == 0 or table.shape[1] > MAX_DIM:
        raise BadParams("rows must be a nonempty list of vectors")
    p = float(params.get("power", 1))
    if p <= 0:
        raise BadParams("power must be positive")
    nonzero = np.flatnonzero(np.linalg.norm(table, axis=1) > 0)
    if nonzero.size == 0:
        raise ZeroTermRejected("every row of the table is zero")
    period = table.shape[0]
    nz_rows = table[nonzero]
    k = nonzero.size

    def batch(n):
        block, pos = np.divmod(n - 1, k)
        return nz_rows[pos] / np.power(block + 1.0, p)[:, None]

    index_map = IndexMap(period, nonzero) if k < period else None
    rays = nz_rows if p <= 1 else np.zeros((0, table.shape[1]))
    bound = 1e-9
    if p > 1:
        from scipy.special import zeta
        bound = float(np.sum(np.linalg.norm(nz_rows, axis=1)) * zeta(p)) + 1e-9
    return TermStream(
        table.shape[1], batch,
        f"custom_table({table.tolist()}, power={p:g})",
        rays=rays, gamma_bound=bound, index_map=index_map,
    )


_BUILDERS = {
    "alternating_harmonic_dir": _alternating_harmonic_dir,
    "positive_harmonic_dir": _positive_harmonic_dir,
    "geometric": _geometric,
    "alt_harmonic_geometric": _alt_harmonic_geometric,
    "interleaved_sum": _interleaved_sum,
    "custom_table": _custom_table,
}


def canonical_family(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in _BUILDERS:
        raise UnknownFamily(f"unknown family {name!r}; known: {', '.join(sorted(_BUILDERS))}")
    return name


def builtin_family(name: str, params: Optional[dict] = None) -> TermStream:
    name = canonical_family(name)
    return _BUILDERS[name](dict(params or {}))


# -- spec files ------------------------------------------------------------

@dataclass
class SeriesSpec:
    family: str
    params: dict = field(default_factory=dict)
    certificate: Optional[StructureCertificate] = None

    def build(self) -> TermStream:
        stream = builtin_family(self.family, self.params)
        if self.certificate is not None:
            stream = stream.with_certificate(self.certificate)
        return stream

    def __eq__(self, other):
        if not isinstance(other, SeriesSpec):
            return NotImplemented
        return serialize_spec(self) == serialize_spec(other)


_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_RATIONAL = re.compile(r"^[+-]?\d+/\d+$")
_INT = re.compile(r"^[+-]?\d+$")


def _parse_number(text: str):
    text = text.strip()
    if _INT.match(text):
        return int(text)
    if _RATIONAL.match(text):
        num, den = text.split("/")
        if int(den) == 0:
            raise ValueError("zero denominator")
        return Fraction(int(num), int(den))
    if _NUMBER.match(text):
        return float(text)
    raise ValueError(f"not a number: {text!r}")


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return ()
    if ";" in text:
        return tuple(tuple(_parse_number(c) for c in part.split(",")) for part in text.split(";") if part.strip())
    if "," in text:
        return tuple(_parse_number(c) for c in text.split(","))
    try:
        return _parse_number(text)
    except ValueError:
        if re.match(r"^[A-Za-z_][\w]*$", text):
            return text
        raise


def _format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int, float, Fraction)):
        return _format_number(v)
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if len(v) == 0:
        return "none"
    if isinstance(v[0], (list, tuple, np.ndarray)):
        return "; ".join(",".join(_format_number(c) for c in row) for row in v)
    return ",".join(_format_number(c) for c in v)


def _tokenize(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.count("=") == 1:
            key, value = line.split("=")
            yield lineno, key.strip(), value.strip()
            continue
        for token in line.split():
            if token.count("=") != 1:
                raise ParseError(f"cannot split {token!r} into key=value", line=lineno)
            key, value = token.split("=")
            yield lineno, key.strip(), value.strip()


def load_spec(text: str) -> SeriesSpec:
    """Parse a ``key = value`` series description.

    Nested specs (for ``interleaved_sum``) use dotted prefixes such as
    ``first.family``; certificate fields use the ``certificate.`` prefix.
    """
    flat = {}
    for lineno, key, value in _tokenize(text):
        if not key or not re.match(r"^[A-Za-z_][\w.]*$", key):
            raise ParseError(f"bad key {key!r}", line=lineno)
        if key in flat:
            raise ParseError("duplicate key", line=lineno, field=key)
        try:
            flat[key] = (lineno, _parse_value(value))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, field=key) from None
    spec = _assemble(flat, "")
    spec.build()
    return spec


def _assemble(flat: dict, prefix: str) -> SeriesSpec:
    fam_key = prefix + "family"
    if fam_key not in flat:
        raise ParseError("missing family", field=fam_key)
    lineno, family = flat[fam_key]
    if not isinstance(family, str):
        raise ParseError("family must be a name", line=lineno, field=fam_key)
    family = canonical_family(family)
    params, cert_fields = {}, {}
    nested = set()
    for key, (ln, value) in flat.items():
        if not key.startswith(prefix) or key == fam_key:
            continue
        rest = key[len(prefix):]
        head, _, tail = rest.partition(".")
        if head == "certificate" and tail:
            cert_fields[tail] = (ln, value)
        elif tail:
            nested.add(head)
        else:
            params[head] = value
    for head in sorted(nested):
        params[head] = _assemble(flat, prefix + head + ".")
    cert = None
    if cert_fields:
        cert = _certificate_from_fields(cert_fields)
    return SeriesSpec(family, params, cert)


def _certificate_from_fields(fields: dict) -> StructureCertificate:
    def vectors(name):
        if name not in fields:
            return np.zeros((0, 0))
        ln, v = fields[name]
        if v == ():
            return np.zeros((0, 0))
        if isinstance(v, tuple) and v and not isinstance(v[0], tuple):
            v = (v,)
        try:
            return np.array([[float(c) for c in row] for row in v])
        except (TypeError, ValueError):
            raise ParseError("expected vectors", line=ln, field="certificate." + name)

    unknown = set(fields) - {"directions", "gamma", "absolutely_convergent"}
    if unknown:
        raise ParseError(f"unknown certificate fields {sorted(unknown)}")
    dirs = vectors("directions")
    if dirs.size:
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        # leave rows that are already unit untouched so round trips are exact
        norms[np.abs(norms - 1.0) <= 1e-14] = 1.0
        dirs = dirs / norms
    absolute = bool(fields.get("absolutely_convergent", (0, False))[1])
    return StructureCertificate(dirs, vectors("gamma"), absolute)


def serialize_spec(spec: SeriesSpec, prefix: str = "") -> str:
    lines = [f"{prefix}family = {spec.family}"]
    nested = []
    for key in sorted(spec.params):
        value = spec.params[key]
        if isinstance(value, SeriesSpec):
            nested.append((key, value))
        else:
            lines.append(f"{prefix}{key} = {_format_value(value)}")
    for key, value in nested:
        lines.append(serialize_spec(value, prefix + key + ".").rstrip("\n"))
    cert = spec.certificate
    if cert is not None:
        lines.append(f"{prefix}certificate.directions = {_format_value(cert.divergence_directions)}")
        lines.append(f"{prefix}certificate.gamma = {_format_value(cert.gamma_basis)}")
        lines.append(f"{prefix}certificate.absolutely_convergent = {_format_value(cert.absolutely_convergent)}")
    return "\n".join(lines) + "\n"


def cross_check_certificate(stream: TermStream, N: int = 100_000) -> dict:
    """Finite-prefix consistency of a stream's declared Gamma.

    Sums ``|<y, x_n>|`` over the prefix for every declared Gamma basis vector
    and compares against the family's documented bound.
    """
    cert = stream.certificate
    if cert is None:
        raise CertificateError("stream carries no certificate")
    bound = stream.gamma_bound
    report = {"N": N, "bound": bound, "sums": []}
    if cert.gamma_basis.size == 0:
        return report
    total = np.zeros(cert.gamma_basis.shape[0])
    for start in range(1, N + 1, 65536):
        stop = min(N + 1, start + 65536)
        total += np.abs(stream.term_range(start, stop) @ cert.gamma_basis.T).sum(axis=0)
    report["sums"] = total.tolist()
    if bound is not None:
        scale = np.linalg.norm(cert.gamma_basis, axis=1)
        bad = np.flatnonzero(total >= bound * np.maximum(scale, 1.0))
        if bad.size:
            raise CertificateError(
                f"Gamma basis vector {int(bad[0])} accumulates {total[bad[0]]:.6g} >= bound {bound:.6g}"
            )
    return report

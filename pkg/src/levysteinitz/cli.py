"""Command-line interface.

Exit codes: 0 success, 1 failed audit, 2 infeasible series or target,
3 inconclusive or budget exhausted, 4 input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional

import numpy as np

from . import torus as tor
from .exceptions import (
    AssertionFailed,
    BadParams,
    BudgetExhausted,
    DuplicateIndex,
    Inconclusive,
    InfeasibleSeries,
    InfeasibleTarget,
    LevySteinitzError,
    NotRearrangeable,
    ParseError,
    UnknownFamily,
    ZeroTermRejected,
)
from .rearranger import Budgets, analyze, default_checkpoints, rearrange_to_target
from .scalar import ScalarSeries, classify_scalar, riemann_rearrange
from .series import load_spec, serialize_spec

EXIT_OK, EXIT_AUDIT, EXIT_INFEASIBLE, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3, 4
DEFAULT_SEED = 0


class UsageError(LevySteinitzError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(c) for c in text.replace(" ", "").split(",") if c], dtype=float)
    except ValueError:
        raise UsageError(f"cannot read vector {text!r}")
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise UsageError(f"cannot read vector {text!r}")
    return v


def _add_source(p):
    src = p.add_argument_group("series")
    src.add_argument("--family", help="built-in family name")
    src.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="family parameter (repeatable)")
    src.add_argument("--spec", help="series spec file")


def _add_budgets(p):
    b = p.add_argument_group("budgets")
    b.add_argument("--prefix", type=int, default=100_000, help="prefix length for estimates")
    b.add_argument("--scan", type=int, default=100_000, help="scan budget for steering material")
    b.add_argument("--emissions", type=int, default=1_000_000, help="emission budget")
    b.add_argument("--threshold", type=float, default=5.0, help="divergence mass threshold")
    b.add_argument("--bucket-radius", type=float, default=0.1, help="sphere bucket radius")
    p.add_argument("--allow-estimated", action="store_true",
                   help="estimate divergence directions when no certificate is available")
    p.add_argument("--paranoid", action="store_true", help="cross-check certificates on a prefix")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="levysteinitz", description="Sum ranges and rearrangements of vector series.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("analyze", help="sum range of a series")
    _add_source(a)
    _add_budgets(a)
    a.add_argument("--json", action="store_true", help="print a JSON document instead of text")

    r = sub.add_parser("rearrange", help="permutation steering partial sums to a target")
    _add_source(r)
    _add_budgets(r)
    r.add_argument("--target", required=True, help="comma separated target vector")
    r.add_argument("--checkpoints", type=int, default=24, help="number of log-spaced checkpoints")
    r.add_argument("--full-trace", action="store_true", help="one CSV row per emitted term")
    r.add_argument("--schedule", choices=("adaptive", "geometric"), default="adaptive")
    r.add_argument("--out", help="CSV destination (default stdout)")

    s = sub.add_parser("scalar", help="classify or rearrange a real series")
    _add_source(s)
    s.add_argument("--values", help="comma separated finite table (continued by zeros)")
    s.add_argument("--functional", help="functional applied to a vector family (default e1)")
    s.add_argument("--prefix", type=int, default=100_000)
    s.add_argument("--threshold", type=float, default=5.0)
    s.add_argument("--target", type=float, help="rearrange towards this real number")
    s.add_argument("--emissions", type=int, default=10_000)
    s.add_argument("--force", action="store_true", help="rearrange even when inconclusive")
    s.add_argument("--out", help="CSV destination (default stdout)")

    t = sub.add_parser("torus", help="the torus construction")
    tsub = t.add_subparsers(dest="torus_command", parser_class=_Parser)
    tb = tsub.add_parser("build", help="list the packets of the first blocks")
    tb.add_argument("--blocks", type=int, default=10)
    tv = tsub.add_parser("verify", help="check the finite witnesses")
    tv.add_argument("--blocks", type=int, default=10)
    tr = tsub.add_parser("rearrange", help="rearrange one character series modulo 1")
    tr.add_argument("--blocks", type=int, default=10)
    tr.add_argument("--k", type=int, default=0, help="character index")
    tr.add_argument("--target", type=float, default=0.25)
    tr.add_argument("--emissions", type=int, help="emissions (default: size of the built blocks)")
    tr.add_argument("--out", help="CSV destination (default stdout)")

    v = sub.add_parser("verify", help="re-audit a saved rearrangement trace")
    v.add_argument("trace", help="CSV written by rearrange")
    v.add_argument("--target", help="expected target (default: inferred from the rows)")
    v.add_argument("--tol", type=float, default=1e-2, help="required final distance")
    v.add_argument("--last", type=int, default=5,
                   help="checkpoints whose window maxima must decrease (full traces)")
    return p


# -- helpers ----------------------------------------------------------------

def _spec_text(args) -> str:
    if args.spec and args.family:
        raise UsageError("give either --spec or --family, not both")
    if args.spec:
        if args.param:
            raise UsageError("--param only applies to --family")
        try:
            with open(args.spec) as fh:
                return fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read spec: {exc}")
    if not args.family:
        raise UsageError("a series is required: --family NAME or --spec FILE")
    lines = [f"family = {args.family}"]
    for item in args.param:
        if item.count("=") != 1:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=")
        lines.append(f"{key.strip()} = {value.strip()}")
    return "\n".join(lines) + "\n"


def _stream(args):
    spec = load_spec(_spec_text(args))
    return spec.build(), spec


def _budgets(args) -> Budgets:
    for name in ("prefix", "scan", "emissions"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name} must be positive")
    return Budgets(args.prefix, args.scan, args.emissions, args.threshold, args.bucket_radius)


def _fmt(v) -> str:
    return "(" + ", ".join(f"{x:.9g}" for x in np.asarray(v, dtype=float).reshape(-1)) + ")"


def _open_out(path: Optional[str], out):
    return open(path, "w", newline="") if path else out


def _sum_range_doc(sr, spec) -> dict:
    doc = {"series": serialize_spec(spec), "feasible": sr.feasible, "estimated": sr.estimated}
    if sr.feasible:
        doc.update(anchor=sr.anchor.tolist(), directions=sr.directions.basis.tolist(),
                   gamma=sr.gamma.basis.tolist())
    else:
        doc.update(witness=sr.witness.tolist(), witness_verdict=str(sr.witness_classification))
    doc["levels"] = sr.diagnostics
    return doc


# -- commands ---------------------------------------------------------------

def cmd_analyze(args, out, err) -> int:
    stream, spec = _stream(args)
    sr = analyze(stream, _budgets(args), allow_estimated=args.allow_estimated,
                 paranoid=args.paranoid)
    if args.json:
        out.write(json.dumps(_sum_range_doc(sr, spec), indent=2, sort_keys=True) + "\n")
        return EXIT_OK if sr.feasible else EXIT_INFEASIBLE
    rows = [("series", stream.description), ("source", "estimated" if sr.estimated else "certificate")]
    if sr.feasible:
        rows += [("feasible", "yes"), ("anchor", _fmt(sr.anchor)),
                 ("directions", "{" + ", ".join(_fmt(b) for b in sr.directions.basis) + "}"),
                 ("gamma", "{" + ", ".join(_fmt(b) for b in sr.gamma.basis) + "}")]
    else:
        rows += [("feasible", "no"), ("witness", _fmt(sr.witness)),
                 ("witness verdict", str(sr.witness_classification))]
    for i, lv in enumerate(sr.levels):
        desc = f"dim {lv.space.dim}, {lv.directions.shape[0]} directions ({lv.source})"
        if lv.ctx is not None:
            desc += f", |D0| = {lv.ctx.size}, delta = {lv.ctx.delta:.4g}, C = {lv.ctx.C:.4g}"
        rows.append((f"level {i}", desc))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        out.write(f"{k:<{width}}  {v}\n")
    return EXIT_OK if sr.feasible else EXIT_INFEASIBLE


def cmd_rearrange(args, out, err) -> int:
    stream, _ = _stream(args)
    budgets = _budgets(args)
    target = _vector(args.target)
    if target.size != stream.dim:
        raise UsageError(f"target has dimension {target.size}, series has {stream.dim}")
    if args.checkpoints < 2:
        raise UsageError("--checkpoints must be at least 2")
    perm = rearrange_to_target(stream, target, budgets, allow_estimated=args.allow_estimated,
                               checkpoints=default_checkpoints(budgets.emissions, args.checkpoints),
                               full_trace=args.full_trace, schedule=args.schedule, seed=args.seed)
    perm.run()
    fh = _open_out(args.out, out)
    try:
        perm.write_csv(fh)
    finally:
        if args.out:
            fh.close()
    maxima = [c.window_max for c in perm.checkpoints[-5:]]
    err.write(f"emitted {perm.steps} terms, final distance {perm.last_dist:.3e}, "
              f"smallest unemitted index {perm.frontier}\n")
    err.write("last window maxima: " + ", ".join(f"{m:.3e}" for m in maxima) + "\n")
    return EXIT_OK


def _scalar_series(args) -> ScalarSeries:
    if args.values is not None:
        if args.family or args.spec:
            raise UsageError("--values excludes --family/--spec")
        return ScalarSeries.from_array(_vector(args.values))
    stream, _ = _stream(args)
    f = _vector(args.functional) if args.functional else np.eye(stream.dim)[0]
    if f.size != stream.dim:
        raise UsageError(f"functional has dimension {f.size}, series has {stream.dim}")
    return ScalarSeries.from_stream(stream, f)


def cmd_scalar(args, out, err) -> int:
    series = _scalar_series(args)
    if args.prefix < 1 or args.emissions < 1:
        raise UsageError("budgets must be positive")
    cls = classify_scalar(series, N=args.prefix, M=args.threshold)
    if args.target is None:
        out.write(f"{cls}\n")
        return EXIT_INCONCLUSIVE if cls.verdict.value == "Inconclusive" else EXIT_OK
    err.write(f"{cls}\n")
    rs = riemann_rearrange(series, args.target, cls, force=args.force)
    fh = _open_out(args.out, out)
    try:
        fh.write("step,emitted_index,term,partial,dist_to_target\n")
        partial = 0.0
        for step in range(1, args.emissions + 1):
            n = next(rs)
            a = float(series.values([n])[0])
            partial += a
            fh.write(f"{step},{n},{a!r},{partial!r},{abs(partial - args.target)!r}\n")
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_torus(args, out, err) -> int:
    if args.torus_command is None:
        raise UsageError("torus needs one of build, verify, rearrange")
    if args.blocks < 1:
        raise UsageError("--blocks must be positive")
    ce = tor.build_counterexample(args.blocks)
    if args.torus_command == "build":
        out.write(f"f = {_fmt(ce.f)}, {len(ce)} terms in {ce.num_blocks} blocks\n")
        out.write(f"{'block':>5} {'purpose':>9} {'count':>7} {'first':>8}  vector\n")
        for p in ce.packets:
            out.write(f"{p.block:>5} {p.purpose:>9} {p.count:>7} {p.start:>8}  {_fmt(p.vector)}\n")
        return EXIT_OK
    if args.torus_command == "verify":
        rep = tor.verify_counterexample(ce)
        out.write(rep.table() + "\n")
        out.write(f"all clauses hold on {rep.terms} terms\n")
        return EXIT_OK
    if not 0 <= args.target < 1:
        raise UsageError("--target must lie in [0, 1)")
    _, trace = tor.character_rearrange(ce, args.k, args.target, args.emissions)
    fh = _open_out(args.out, out)
    try:
        trace.write_csv(fh)
    finally:
        if args.out:
            fh.close()
    err.write(f"final mod-1 distance {trace.mod1_dist[-1]:.3e}; "
              f"largest planar f partial sum {trace.f_partial_max:.3f}\n")
    return EXIT_OK


def read_trace(path: str):
    """Rows of a rearrangement CSV as ``(steps, indices, partials, dists)``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read trace: {exc}")
    if not rows:
        raise ParseError("empty trace", line=1)
    head = rows[0]
    if head[:2] != ["step", "emitted_index"] or head[-1] != "dist_to_target":
        raise ParseError("not a rearrangement trace", line=1)
    pcols = [i for i, h in enumerate(head) if h.startswith("partial_")]
    if not pcols:
        raise ParseError("no partial columns", line=1)
    steps, idx, partials, dists = [], [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(head):
            raise ParseError("wrong number of fields", line=line)
        try:
            steps.append(int(row[0]))
            idx.append(int(row[1]))
            partials.append([float(row[i]) for i in pcols])
            dists.append(float(row[-1]))
        except ValueError as exc:
            raise ParseError(str(exc), line=line)
    return np.array(steps), np.array(idx), np.array(partials), np.array(dists)


def cmd_verify(args, out, err) -> int:
    steps, idx, partials, dists = read_trace(args.trace)
    if steps.size == 0:
        raise ParseError("trace has no rows", line=2)
    problems = []
    if np.any(np.diff(steps) <= 0):
        problems.append("steps are not increasing")
    uniq, counts = np.unique(idx, return_counts=True)
    if np.any(counts > 1):
        problems.append(f"index {int(uniq[np.argmax(counts > 1)])} emitted twice")
    if args.target is not None:
        target = _vector(args.target)
        if target.size != partials.shape[1]:
            raise UsageError("target dimension does not match the trace")
        recomputed = np.linalg.norm(partials - target, axis=1)
        if np.max(np.abs(recomputed - dists)) > 1e-9 * max(1.0, float(np.max(dists))):
            problems.append("dist_to_target does not match the partial sums")
    full = steps.size == steps[-1] and np.array_equal(steps, np.arange(1, steps.size + 1))
    if full:
        # window maxima between log-spaced checkpoints, recomputed from every row
        edges = [0] + default_checkpoints(int(steps[-1]))
        maxima = [float(dists[a:b].max()) for a, b in zip(edges, edges[1:]) if b > a]
        tail = maxima[-args.last:]
        if len(tail) < args.last or not all(b < a for a, b in zip(tail, tail[1:])):
            problems.append(f"window maxima over the last {args.last} checkpoints "
                            "are not strictly decreasing")
    else:
        tail = dists[-args.last:].tolist()
    if dists[-1] >= args.tol:
        problems.append(f"final distance {dists[-1]:.3e} is not below {args.tol:g}")
    out.write(f"rows {steps.size} ({'full trace' if full else 'checkpoints'}), "
              f"last step {int(steps[-1])}, final distance {dists[-1]:.3e}\n")
    label = "last window maxima" if full else "last checkpoint distances"
    out.write(f"{label}: " + ", ".join(f"{m:.3e}" for m in tail) + "\n")
    for p in problems:
        out.write(f"FAIL {p}\n")
    if not problems:
        out.write("trace passes\n")
    return EXIT_AUDIT if problems else EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "rearrange": cmd_rearrange, "scalar": cmd_scalar,
            "torus": cmd_torus, "verify": cmd_verify}


_VALUE_OPTIONS = {"--target", "--functional", "--values", "--param"}


def _glue_negative_values(argv: list) -> list:
    """Let vector values such as ``-3,1`` follow their option with a space."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and (argv[i + 1][1:2].isdigit() or argv[i + 1][1:2] == "."):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run(argv=None, out=None, err=None) -> int:
    """Run one command; returns the exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: analyze, rearrange, scalar, torus, verify")
        return COMMANDS[args.command](args, out, err)
    except InfeasibleSeries as exc:
        err.write(f"infeasible series: {exc}\n")
        if exc.witness is not None:
            out.write(f"witness functional {_fmt(exc.witness)}\n")
        return EXIT_INFEASIBLE
    except (InfeasibleTarget, NotRearrangeable) as exc:
        err.write(f"infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except (Inconclusive, BudgetExhausted) as exc:
        err.write(f"inconclusive: {exc}\n")
        return EXIT_INCONCLUSIVE
    except (AssertionFailed, DuplicateIndex) as exc:
        err.write(f"audit failed: {exc}\n")
        return EXIT_AUDIT
    except (UsageError, ParseError, UnknownFamily, BadParams, ZeroTermRejected, ValueError) as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_INPUT


def main(argv=None) -> int:
    sys.exit(run(argv))

import io

import numpy as np
import pytest

from levysteinitz.exceptions import BudgetExhausted, DuplicateIndex, Inconclusive, InfeasibleSeries, InfeasibleTarget
from levysteinitz.rearranger import (
    Budgets,
    analyze,
    audit_indices,
    check_feasibility,
    default_checkpoints,
    rearrange_to_target,
    verify_stream,
)
from levysteinitz.series import TermStream, builtin_family

SMALL = Budgets(emissions=20_000)


@pytest.fixture(scope="module")
def ahg_range(ahg):
    return analyze(ahg)


class TestAnalyze:
    def test_anchor_and_directions(self, ahg_range):
        sr = ahg_range
        assert sr.feasible and not sr.estimated
        assert np.allclose(sr.anchor, [0, 1])
        assert sr.directions.same_as(sr.gamma.complement())
        assert sr.contains([5, 1]) and not sr.contains([5, 1.1])

    def test_absolute_series_is_a_point(self):
        sr = analyze(builtin_family("geometric", {"r": (0.5, -0.5)}))
        assert sr.directions.dim == 0
        assert np.allclose(sr.anchor, [1, -1 / 3])

    def test_positive_harmonic_is_infeasible(self):
        sr = analyze(builtin_family("positive_harmonic_dir", {"u": (1, 0)}))
        assert not sr.feasible
        assert sr.witness @ np.array([1.0, 0.0]) > 0

    def test_needs_certificate_or_estimate(self):
        raw = TermStream(1, lambda n: ((-1.0) ** n / n)[:, None])
        with pytest.raises(Inconclusive):
            analyze(raw)
        sr = analyze(raw, Budgets(prefix=100_000), allow_estimated=True)
        assert sr.feasible and sr.estimated and sr.directions.dim == 1

    def test_feasibility(self):
        v = check_feasibility(builtin_family("positive_harmonic_dir", {"u": (0, 1)}))
        assert not v.feasible and v.witness[1] > 0.99

    def test_diagnostics_describe_levels(self, ahg_range):
        d = ahg_range.diagnostics
        assert d[0]["source"] == "certificate"
        assert d[0]["delta"] == pytest.approx(0.225)


class TestRearrange:
    def test_rejections(self, ahg):
        with pytest.raises(InfeasibleTarget) as info:
            rearrange_to_target(ahg, [0, 0])
        assert np.allclose(info.value.offending, [0, -1])
        with pytest.raises(InfeasibleSeries):
            rearrange_to_target(builtin_family("positive_harmonic_dir", {"u": (1,)}), [1.0])
        with pytest.raises(ValueError):
            rearrange_to_target(ahg, [0, 1, 0])

    def test_small_budget_run(self, ahg, ahg_range):
        perm = rearrange_to_target(ahg, [0.5, 1], SMALL, sum_range=ahg_range, full_trace=True)
        emitted = [row[1] for row in perm.run().trace_rows()]
        count, smallest = audit_indices(emitted)
        assert count == perm.steps == len(emitted)
        assert smallest == perm.frontier
        assert perm.last_dist < 0.05
        assert all(r.condition4 for r in perm.rounds)

    def test_geometric_schedule_hits_scan_budget(self, ahg, ahg_range):
        # halving eps every round needs exponentially many steering terms
        perm = rearrange_to_target(ahg, [0.5, 1], Budgets(emissions=50), sum_range=ahg_range,
                                   schedule="geometric").run()
        assert [r.eps for r in perm.rounds[:3]] == [0.5, 0.25, 0.125]
        with pytest.raises(BudgetExhausted):
            rearrange_to_target(ahg, [0.5, 1], Budgets(emissions=1000), sum_range=ahg_range,
                                schedule="geometric").run()

    def test_verify_stream(self, ahg, ahg_range):
        perm = rearrange_to_target(ahg, [-1, 1], SMALL, sum_range=ahg_range)
        rep = verify_stream(perm, target=[-1, 1], checkpoints=[100, 1000, 5000])
        assert rep.emitted == 5000 and rep.frontier_ok
        assert [c.step for c in rep.checkpoints][:3] == [100, 1000, 5000]
        with pytest.raises(ValueError):
            verify_stream(rearrange_to_target(ahg, [-1, 1], SMALL, sum_range=ahg_range), target=[0, 1])

    def test_csv_is_deterministic(self, ahg, ahg_range):
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            rearrange_to_target(ahg, [2, 1], SMALL, sum_range=ahg_range).run().write_csv(buf)
            outs.append(buf.getvalue())
        assert outs[0] == outs[1]
        head = outs[0].splitlines()[0]
        assert head == "step,emitted_index,term_0,term_1,partial_0,partial_1,dist_to_target"

    def test_one_dimensional(self):
        s = builtin_family("alternating_harmonic_dir", {"u": (1,)})
        perm = rearrange_to_target(s, [0.3], SMALL).run()
        assert perm.last_dist < 0.05

    def test_estimated_series(self):
        raw = TermStream(1, lambda n: ((-1.0) ** n / n)[:, None])
        perm = rearrange_to_target(raw, [1.0], SMALL, allow_estimated=True).run()
        assert perm.last_dist < 0.05

    def test_table_indices_include_zero_rows(self):
        s = builtin_family("table", {"rows": ((1,), (0,), (-1,))})
        perm = rearrange_to_target(s, [0.25], SMALL, full_trace=True).run()
        emitted = [row[1] for row in perm.trace_rows()]
        _, smallest = audit_indices(emitted)
        assert 2 in emitted and smallest == perm.frontier


def test_audit_indices():
    assert audit_indices([2, 1, 4]) == (3, 3)
    with pytest.raises(DuplicateIndex) as info:
        audit_indices([1, 2, 1])
    assert info.value.step == 3


def test_default_checkpoints():
    cps = default_checkpoints(1_000_000)
    assert cps[0] == 1 and cps[-1] == 1_000_000
    assert cps == sorted(set(cps)) and len(cps) <= 24

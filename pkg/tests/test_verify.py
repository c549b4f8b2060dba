import numpy as np
import pytest

from dirac_asym.potential import PiecewisePotential
from dirac_asym.verify import SweepPlan, VerdictTable, run_identity_suite, run_sweep, series_verdict


def test_verdict_rule():
    assert series_verdict([1.0, 1.0, 9.9, 2.0]) == "bounded"
    assert series_verdict([1.0, 1.0, 10.1]) == "growing"
    assert series_verdict([1.0]) == "inconclusive"
    assert series_verdict([0.0, 0.0, 0.0]) == "bounded"
    assert series_verdict([1.0, np.inf]) == "growing"


def test_plan_validation(unit_pot):
    with pytest.raises(ValueError):
        SweepPlan(unit_pot, r=-1)
    with pytest.raises(ValueError):
        SweepPlan(unit_pot, tiers=("nope",))
    with pytest.raises(ValueError):
        SweepPlan(unit_pot, tiers=("pert-W",))
    with pytest.raises(ValueError):
        SweepPlan(unit_pot, rays=(-np.pi / 4,))
    plan = SweepPlan(unit_pot, rays=(0.0, 0.5), t0=10, doublings=2, r=1.0)
    assert plan.radii == (10.0, 20.0, 40.0)
    assert plan.points()[:2] == [(0.0, 10.0), (0.5, 10.0)]
    assert all(plan.mu(th, t).imag > -1.0 for th, t in plan.points())


def test_zero_potential_sweep(zero_pot):
    tab = run_sweep(SweepPlan(zero_pot, rays=(0.0, np.pi / 8), doublings=2))
    assert all(r.sup_error < 1e-12 and r.ratio < 1e-12 for r in tab.rows)
    assert tab.all_bounded()


def test_deterministic_and_thread_independent(pl_pot):
    plan = SweepPlan(pl_pot, rays=(0.0, np.pi / 8), doublings=2)
    a = run_sweep(plan, threads=1)
    b = run_sweep(plan, threads=3)
    assert a == b
    assert VerdictTable.from_records([rec[:-1] for rec in a.records()]) == a


def test_skipped_points_do_not_fail():
    # a = 2 * 2**3 = 16 puts the gate beyond |mu| = 40
    pot = PiecewisePotential.constant(2.0, 2.0)
    plan = SweepPlan(pot, rays=(0.0,), t0=10, doublings=4, tiers=("w-T",), auto_raise=False)
    tab = run_sweep(plan)
    flags = [r.skipped for r in tab.rows]
    assert flags == [True, True, True, False, False]
    assert tab.all_bounded()


def test_auto_raise_reported(unit_pot):
    plan = SweepPlan(unit_pot, rays=(0.0,), t0=20, doublings=1, r=1.0, tiers=("w-R",))
    tab = run_sweep(plan)
    assert tab.info["t0_requested"] == 20 and tab.info["t0"] == 640
    assert not any(r.skipped for r in tab.rows)


def test_monotone_refinement(pl_pot):
    base = dict(rays=(0.0, np.pi / 8), doublings=2, tiers=("w-R", "v-S", "main1-c", "main1-s"))
    a = run_sweep(SweepPlan(pl_pot, density=1.0, **base))
    b = run_sweep(SweepPlan(pl_pot, density=2.0, **base))
    for ra, rb in zip(a.rows, b.rows):
        assert abs(ra.sup_error - rb.sup_error) < 1e-7


def test_identity_suite(zero_pot, pl_pot):
    assert run_identity_suite(zero_pot, [3.0]).passed()
    rep = run_identity_suite(pl_pot, [3.0, 10 - 1.5j], r=2.0)
    assert rep.passed()
    int4_mus = {(r[1], r[2]) for r in rep.rows if r[4] == "int4"}
    assert int4_mus == {(3.0, 0.0)}

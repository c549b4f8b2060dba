import numpy as np
import pytest

from dirac_asym.dirac import (
    TIERS,
    DiracContext,
    Profile,
    apply_K,
    approx_tier,
    cauchy_from_profiles,
    cauchy_solutions,
    fundamental_w,
    neumann_solve,
    quadruple_L,
    tier_error,
)
from dirac_asym.exceptions import DegenerateNormalizer, GateViolation
from dirac_asym.oracle import direct_profiles, solve_direct, system_residual

# independent references (mpmath nested quadrature / sympy closed forms)
K1E1_UNIT_MU5_1 = 0.029386684949825903 + 0.092689144303498682j
K1E1_PL_MU5_1 = 0.0006805849447288843 - 0.001592926984478285j
L1_UNIT_MU3 = -0.016015077375110032 - 0.01028611957316397j


def test_zero_potential_is_free(zero_pot):
    fs = cauchy_solutions(DiracContext(zero_pot, 12 + 1j))
    one = fs.w.first
    assert np.max(np.abs(one.values - 1)) == 0
    assert fs.w.second.sup() == 0 and fs.v.first.sup() == 0
    assert fs.z2_at_0 == 1


def test_K1e_frozen(unit_pot, pl_pot):
    assert abs(DiracContext(unit_pot, 5 + 1j).Ke(1).at1 - K1E1_UNIT_MU5_1) < 1e-14
    assert abs(DiracContext(pl_pot, 5 + 1j).Ke(1).at1 - K1E1_PL_MU5_1) < 1e-14


def test_L_frozen(unit_pot):
    assert abs(quadruple_L(unit_pot, 3.0, 1.0) - L1_UNIT_MU3) < 1e-14


def test_K_linear(pl_pot):
    ctx = DiracContext(pl_pot, 25.0)
    g = ctx.grid
    a, b = g.sample_func(np.sin), g.sample_func(np.exp)
    lhs = apply_K(ctx, 2, a * 2.0 + b)
    rhs = apply_K(ctx, 2, a) * 2.0 + apply_K(ctx, 2, b)
    assert (lhs - rhs).sup() < 1e-15


@pytest.mark.parametrize("mu", [20.0, 40 + 10j])
def test_neumann_matches_oracle(pl_pot, mu):
    ctx = DiracContext(pl_pot, mu)
    fs = cauchy_solutions(ctx, fallback=False)
    W, V = direct_profiles(pl_pot, mu, ctx.grid)
    for a, b in zip(fs.w.pair() + fs.v.pair(), W + V):
        assert (a - b).sup() < 1e-10


def test_boundary_data_and_det(pl_pot):
    fs = cauchy_solutions(DiracContext(pl_pot, 30 + 2j))
    for k, v in fs.boundary_residuals().items():
        assert v < 1e-13, k
    assert fs.det_variation() < 1e-12


def test_gate_and_fallback(unit_pot):
    ctx = DiracContext(unit_pot, 3 - 0.5j, r=1.0)
    with pytest.raises(GateViolation):
        neumann_solve(ctx, 1)
    w = fundamental_w(ctx, fallback=True)
    assert w.method == "direct"
    with pytest.raises(GateViolation):
        fundamental_w(ctx, fallback=False)


def test_degenerate_normalizer(zero_pot):
    ctx = DiracContext(zero_pot, 10.0)
    e = ctx.e
    W = Profile(e, e * 0.0, "w", ctx.mu)
    V = Profile(e * 0.0, e * 0.0, "v", ctx.mu)
    with pytest.raises(DegenerateNormalizer):
        cauchy_from_profiles(W, V, ctx.mu)


def test_solve_direct_plugback(unit_pot):
    y1, y2 = solve_direct(unit_pot, 5.0, 1.0, 0.5)
    assert system_residual(unit_pot, 5.0, y1, y2) < 1e-8


def test_tiers_zero_on_free_system(zero_pot):
    ctx = DiracContext(zero_pot, 50.0)
    fs = cauchy_solutions(ctx)
    for name in TIERS:
        err, ratio = tier_error(approx_tier(ctx, name), fs, ctx)
        assert err < 1e-12 and ratio < 1e-12, name

import numpy as np
import pytest

from dirac_asym.dirac import approx_tier
from dirac_asym.exceptions import ContractionFailure
from dirac_asym.grid import bwd
from dirac_asym.oracle import direct_profiles
from dirac_asym.perturbed import (
    S1,
    S1_inv,
    apply_A,
    approx_first_order,
    classical_oracle,
    operator_norm_estimate,
    perturbed_system,
    profile_error,
    sl_fundamental,
    sl_reduce,
    solve_perturbed,
    square_capped,
)
from dirac_asym.potential import PerturbationMatrix, PiecewisePoly, PiecewisePotential, interpolate_cubic, lp_norm

# A_1 (e, e) for sigma1 = sigma2 = 1, p11 = 1, mu = 40, from the actual-level
# variation-of-constants formula with matrix-exponential solutions (mpmath)
A1_REF = {
    0.3: (0.29989419590403965 - 0.0006359731243741485j, -0.006696892497881702 - 0.00689999742295431j),
    0.8: (0.8002414346013021 - 0.004110734246478484j, -0.003747165179416483 + 0.021963851596879493j),
}


def _P(p11=0.0, p12=0.0, p21=0.0, p22=0.0):
    return PerturbationMatrix(*(PiecewisePoly.constant(v) for v in (p11, p12, p21, p22)))


def test_A1_frozen(unit_pot):
    s = perturbed_system(unit_pot, _P(p11=1.0), 40.0)
    A = apply_A(s, 1, (s.ctx.e, s.ctx.e))
    for x, (a, b) in A1_REF.items():
        assert abs(A[0](x) - a) < 1e-12 and abs(A[1](x) - b) < 1e-12


def test_zero_perturbation(pl_pot):
    s = perturbed_system(pl_pot, PerturbationMatrix.zero(), 30.0)
    e = s.ctx.e
    for j in (1, 2):
        A = apply_A(s, j, (e, e))
        assert A[0].sup() == 0 and A[1].sup() == 0
    res = solve_perturbed(s, "W")
    assert res.iterations == 1
    assert profile_error(res.Z, s.fs.w.pair()) == 0


def test_decoupled_against_direct_solver(zero_pot):
    P = _P(p11=1.0)
    s = perturbed_system(zero_pot, P, 25.0)
    W, V = direct_profiles(zero_pot, 25.0, s.grid, P)
    assert profile_error(solve_perturbed(s, "W").Z, W) < 1e-8
    assert profile_error(solve_perturbed(s, "V").Z, V) < 1e-8


def test_fixed_point_against_direct_solver(pl_pot):
    P = _P(0.3, 0.5j, -0.2, 0.4)
    for mu in (20.0, 40 + 10j):
        s = perturbed_system(pl_pot, P, mu)
        W, V = direct_profiles(pl_pot, mu, s.grid, P)
        rw, rv = solve_perturbed(s, "W"), solve_perturbed(s, "V")
        assert profile_error(rw.Z, W) < 1e-10
        assert profile_error(rv.Z, V) < 1e-10
        # the returned pair solves the integral equation
        A = apply_A(s, 1, rw.Z)
        resid = max((rw.Z[k] - s.fs.w.pair()[k] - A[k] / s.mu).sup() for k in (0, 1))
        assert resid < 1e-12


def test_iterations_drop_with_mu(pl_pot):
    P = _P(1.0, 1.0, 1.0, 1.0)
    n50 = solve_perturbed(perturbed_system(pl_pot, P, 50.0), "W").iterations
    n100 = solve_perturbed(perturbed_system(pl_pot, P, 100.0), "W").iterations
    assert n100 <= n50


def test_contraction_failure(zero_pot):
    s = perturbed_system(zero_pot, _P(40.0, 40.0, 40.0, 40.0), 2.0)
    with pytest.raises(ContractionFailure):
        solve_perturbed(s, "W")


def test_first_order_exact_when_trivial(zero_pot):
    s = perturbed_system(zero_pot, PerturbationMatrix.zero(), 15.0)
    t = approx_first_order(s, "W")
    assert profile_error(t.predicted, s.fs.w.pair()) == 0


def test_first_order_term_closed_form(zero_pot):
    mu = 15.0
    s = perturbed_system(zero_pot, _P(p21=1.0), mu)
    t = approx_first_order(s, "W")
    x = s.grid.nodes
    ref = -(np.exp(2j * mu * (1 - x)) - 1) / (2j * mu) / mu
    assert np.max(np.abs(t.predicted[1].values - ref)) < 1e-15
    assert np.max(np.abs(t.predicted[0].values - 1)) == 0


@pytest.mark.parametrize("mu", [40.0, 80 + 10j])
def test_first_order_term_sign(pl_pot, mu):
    # the first-order term is itself small, so compare with its negation
    mesh = np.array([0.0, 0.4, 1.0])
    pc = lambda a, b: PiecewisePoly(mesh, np.array([[a], [b]]))
    P = PerturbationMatrix(pc(1.0, -2.0), pc(3.0, 1.0), pc(-1.0, 2.0), pc(0.5, 4.0))
    s = perturbed_system(pl_pot, P, mu)
    for which, base in (("W", "w-R"), ("V", "v-R")):
        exact = solve_perturbed(s, which).Z
        pred = approx_first_order(s, which).predicted
        b = approx_tier(s.ctx, base).predicted
        flipped = tuple(2 * bb - pp for bb, pp in zip(b, pred))
        assert profile_error(pred, exact) < 0.2 * min(profile_error(flipped, exact), profile_error(b, exact))


def test_operator_norm_bounded(pl_pot):
    P = _P(1.0, 0.5, -0.5, 1.0)
    norms = [
        operator_norm_estimate(perturbed_system(pl_pot, P, t * np.exp(1j * np.pi / 8)), j, 20, seed=1)
        for t in (50, 100, 200, 400, 800)
        for j in (1, 2)
    ]
    assert max(norms) <= 10 * np.median(norms[:4])


def test_sl_reduce_examples():
    zero = PiecewisePoly.constant(0.0)
    s = sl_reduce(zero, 10.0)
    assert s.P.is_zero() and s.pot.is_zero()
    s = sl_reduce(PiecewisePoly.constant(1.0), 10.0)
    assert np.allclose([e.coeffs[0, 0] for e in s.P.entries()], [0.5j, 0.5j, -0.5j, -0.5j])
    x = PiecewisePoly(np.array([0.0, 1.0]), np.array([[0.0, 1.0]]))
    s = sl_reduce(x, 10.0)
    assert s.tau_l1 == pytest.approx(1 / 3, abs=1e-14)
    with pytest.raises(ValueError):
        sl_reduce(x, 0.0)


def test_square_capped_reprojection():
    sigma = interpolate_cubic(lambda x: np.cos(np.pi * x), 16)
    tau = square_capped(sigma)
    assert tau.degree <= 3
    t = np.linspace(0, 1, 301)
    assert np.max(np.abs(tau(t) - sigma(t) ** 2)) < 1e-12


def test_S1_inverse():
    rng = np.random.default_rng(0)
    for _ in range(10):
        mu = complex(*rng.normal(size=2) * 10)
        assert np.max(np.abs(S1(mu) @ S1_inv(mu) - np.eye(2))) < 1e-14


def test_sl_free_equation():
    res = sl_fundamental(PiecewisePoly.constant(0.0), 12.0)
    assert np.max(np.abs(res.y1.y.values - 1)) < 1e-15
    assert np.max(np.abs(res.y2.y.values - 1)) < 1e-15


def test_sl_classical_oracle_smooth():
    sigma = interpolate_cubic(lambda x: np.cos(np.pi * x), 16)
    res = sl_fundamental(sigma, 30.0)
    y1, y2 = classical_oracle(sigma, 30.0, res.system.grid)
    assert (res.y1.y - y1).sup() < 1e-8
    assert (res.y2.y - y2).sup() < 1e-8

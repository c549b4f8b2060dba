import math

import numpy as np
from hypothesis import assume, given, settings, strategies as st
from scipy.integrate import quad

from dirac_asym.dirac import DiracContext, cauchy_solutions
from dirac_asym.grid import cumint, fwd, make_grid, tailint
from dirac_asym.identities import EXACT_IDS, identity_eval
from dirac_asym.io import dumps_table, read_table
from dirac_asym.oscquad import osc_cell_moment
from dirac_asym.perturbed import S1, S1_inv
from dirac_asym.potential import lp_norm, random_piecewise_constant, random_piecewise_linear
from dirac_asym.verify import series_verdict

SETTINGS = settings(max_examples=25, deadline=None)
coef = st.floats(-3, 3, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)
mus = st.builds(complex, st.floats(2, 80), st.floats(0, 15))


@SETTINGS
@given(st.lists(coef, min_size=1, max_size=4), st.floats(0, 0.9), st.floats(0.01, 0.5), st.floats(0.1, 60), st.sampled_from([1, -1]))
def test_moment_matches_adaptive_quadrature(c, a, w, mu, sign):
    b = min(a + w, 1.0)
    p = np.polynomial.polynomial.Polynomial(c)
    f = lambda t: np.exp(sign * 2j * mu * (t - a)) * p(t)
    ref = quad(lambda t: f(t).real, a, b, limit=200)[0] + 1j * quad(lambda t: f(t).imag, a, b, limit=200)[0]
    assert abs(osc_cell_moment((a, b), c, mu, sign, a) - ref) < 1e-10 * max(1.0, abs(ref))


@SETTINGS
@given(seeds, mus)
def test_running_integral_derivative(seed, mu):
    pot = random_piecewise_linear(np.random.default_rng(seed))
    g = make_grid(pot.mesh, mu)
    f = g.sample(pot.sigma1)
    F = fwd(f, 2j * mu)
    # (d/dx) int_0^x e^{lam (x - t)} f = lam F + f
    r = F.derivative() - F * (2j * mu) - f
    assert r.sup() < 1e-7 * max(1.0, abs(mu)) * max(f.sup(), 1.0)
    total = cumint(f) + tailint(f)
    assert np.max(np.abs(total.values - total.at0)) < 1e-13


@SETTINGS
@given(seeds, mus, st.sampled_from([0.0, 0.3, 0.7, 1.0]))
def test_exact_identities_random(seed, mu, x):
    pot = random_piecewise_constant(np.random.default_rng(seed))
    ctx = DiracContext(pot, mu)
    for name in EXACT_IDS:
        assert identity_eval(name, ctx, x=x).passed(1e-10), name


@SETTINGS
@given(seeds, mus)
def test_liouville_determinant_constant(seed, mu):
    pot = random_piecewise_linear(np.random.default_rng(seed))
    fs = cauchy_solutions(DiracContext(pot, mu))
    assert fs.det_variation() < 1e-10


@SETTINGS
@given(seeds, st.floats(0.1, 10))
def test_norms_scale(seed, k):
    pot = random_piecewise_linear(np.random.default_rng(seed))
    for p in (1.0, 1.5, 2.0):
        assert math.isclose(lp_norm(pot.sigma1.scaled(k), p), k * lp_norm(pot.sigma1, p), rel_tol=1e-12)


@SETTINGS
@given(st.builds(complex, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)).filter(lambda z: abs(z) > 1e-3))
def test_S1_inverse_property(mu):
    assert np.max(np.abs(S1(mu) @ S1_inv(mu) - np.eye(2))) < 1e-13


@SETTINGS
@given(st.lists(st.floats(0.0, 1e6), min_size=2, max_size=8), st.floats(1e-3, 1e3))
def test_verdict_scale_invariant(ratios, k):
    ref = 10 * np.median(ratios[:2])
    assume(abs(max(ratios) - ref) > 1e-9 * max(ref, 1.0))
    assert series_verdict([k * r for r in ratios]) == series_verdict(ratios)


@SETTINGS
@given(st.lists(st.tuples(st.floats(allow_nan=False), st.booleans(), st.text("abc", min_size=1)), max_size=10), st.sampled_from(["csv", "jsonl"]))
def test_table_round_trip(rows, fmt):
    cols, back, _ = read_table(dumps_table(["x", "flag", "name"], rows, fmt))
    assert back == [tuple(r) for r in rows]

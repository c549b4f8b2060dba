import json

import numpy as np
import pytest

from dirac_asym.potential import (
    PerturbationMatrix,
    PiecewisePoly,
    PiecewisePotential,
    PotentialError,
    interpolate_cubic,
    load_potential,
    lp_norm,
    random_piecewise_constant,
    random_piecewise_linear,
    save_potential,
    sigma_max_norm,
)


def test_eval_and_cells():
    mesh = np.array([0.0, 0.5, 1.0])
    p = PiecewisePoly(mesh, np.array([[1.0, 2.0], [3.0, 0.0]]))
    assert p(np.array([0.25]))[0] == pytest.approx(1.5)
    assert p(np.array([0.75]))[0] == pytest.approx(3.0)
    assert p.degree == 1 and p.n_cells == 2


def test_lp_norms_closed_form():
    x = PiecewisePoly(np.array([0.0, 1.0]), np.array([[0.0, 1.0]]))
    assert lp_norm(x, 1.0) == pytest.approx(0.5, abs=1e-14)
    assert lp_norm(x, 2.0) == pytest.approx(np.sqrt(1 / 3), abs=1e-14)
    assert lp_norm(x, np.inf) == pytest.approx(1.0, abs=1e-12)


def test_refined_is_same_function():
    rng = np.random.default_rng(0)
    pot = random_piecewise_linear(rng)
    fine = np.union1d(pot.mesh, np.linspace(0, 1, 7))
    r = pot.sigma1.refined(fine)
    x = rng.uniform(0, 1, 50)
    assert np.allclose(r(x), pot.sigma1(x), atol=1e-13)


def test_degree_cap_and_exponent():
    mesh = np.array([0.0, 1.0])
    quartic = PiecewisePoly(mesh, np.ones((1, 5)))
    with pytest.raises(PotentialError):
        PiecewisePotential(quartic, quartic)
    c = PiecewisePoly.constant(1.0)
    with pytest.raises(PotentialError):
        PiecewisePotential(c, c, 2.0)
    PiecewisePotential(c, c, 2.0, allow_p2=True)


def test_random_generators_normalised():
    rng = np.random.default_rng(3)
    for gen in (random_piecewise_constant, random_piecewise_linear):
        pot = gen(rng)
        assert sigma_max_norm(pot, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_interpolate_cubic_continuous():
    s = interpolate_cubic(lambda x: np.cos(np.pi * x), 16)
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(s(x) - np.cos(np.pi * x))) < 1e-5
    e = s.mesh[1:-1]
    left = s.eval_cell(np.arange(len(e)), e)
    right = s.eval_cell(np.arange(1, len(e) + 1), e)
    assert np.max(np.abs(left - right)) < 1e-12


def test_file_round_trip(tmp_path, pl_pot):
    P = PerturbationMatrix(*(PiecewisePoly.constant(v, pl_pot.mesh) for v in (1.0, 0.5j, 0.0, -2.0)))
    path = tmp_path / "pot.json"
    save_potential(path, pl_pot, P)
    pot, P2 = load_potential(path)
    assert np.array_equal(pot.sigma1.coeffs, pl_pot.sigma1.coeffs)
    assert np.array_equal(P2.p22.coeffs, P.p22.coeffs)


@pytest.mark.parametrize(
    "payload",
    [{}, {"mesh": [0, 0.5, 0.4, 1]}, {"mesh": [0, 1], "sigma1": [[1.0]]}, {"mesh": [0, 1], "sigma1": [[[1, 0]], [[1, 0]]]}],
)
def test_bad_files(tmp_path, payload):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(PotentialError):
        load_potential(path)


def test_missing_file(tmp_path):
    with pytest.raises(PotentialError):
        load_potential(tmp_path / "nope.json")

import numpy as np
import pytest

from dirac_asym import kernels, _pykernels
from dirac_asym.grid import GridFunction, GridMismatch, bwd, cumint, fwd, lobatto, make_grid, scaled_exp, tailint


def test_lobatto_rule_exact_for_polynomials():
    x, w = lobatto(12)
    for k in range(22):
        assert np.sum(w * x**k) == pytest.approx(1.0 / (k + 1), abs=1e-14)


@pytest.mark.parametrize("mu", [5.0, 40 + 10j, 1000 - 5j])
def test_running_integrals_of_one(mu):
    g = make_grid(np.array([0.0, 0.3, 1.0]), mu)
    one = g.constant(1.0)
    lam = 2j * mu
    x = g.nodes
    ref_f = (np.exp(lam * x) - 1) / lam
    ref_b = (np.exp(lam * (1 - x)) - 1) / lam
    assert np.max(np.abs(fwd(one, lam).values - ref_f)) < 1e-14 * max(1.0, np.abs(ref_f).max() * abs(lam))
    assert np.max(np.abs(bwd(one, lam).values - ref_b)) < 1e-14 * max(1.0, np.abs(ref_b).max() * abs(lam))
    assert np.max(np.abs(cumint(one).values - x)) < 1e-14
    assert np.max(np.abs(tailint(one).values - (1 - x))) < 1e-14


def test_backends_agree():
    g = make_grid(np.array([0.0, 0.5, 1.0]), 123.0)
    rng = np.random.default_rng(1)
    f = np.ascontiguousarray(rng.normal(size=g.nodes.shape) + 0j)
    W, phase = g.matrices(246j, False)
    a = _pykernels.running_forward(_pykernels.apply_local(W, f, g.kind), phase, g.kind)
    b = kernels.running_forward(kernels.apply_local(W, f, g.kind), phase, g.kind)
    assert np.max(np.abs(a - b)) < 1e-13


def test_interpolation_and_derivative():
    g = make_grid(np.array([0.0, 1.0]), 10.0)
    f = g.sample_func(lambda x: np.sin(3 * x))
    xs = np.linspace(0, 1, 37)
    assert np.max(np.abs(f(xs) - np.sin(3 * xs))) < 1e-13
    assert np.max(np.abs(f.derivative().values - 3 * np.cos(3 * g.nodes))) < 1e-10
    assert f.lq_norm(np.inf) == pytest.approx(1.0, abs=1e-13)


def test_grid_mismatch():
    a = make_grid(np.array([0.0, 1.0]), 10.0).constant(1.0)
    b = make_grid(np.array([0.0, 0.5, 1.0]), 10.0).constant(1.0)
    with pytest.raises(GridMismatch):
        a + b


def test_scaled_exp_no_overflow():
    x = np.linspace(0, 1, 11)
    wp, wm = scaled_exp(x, 5 + 900j)
    assert np.all(np.isfinite(wp)) and np.all(np.abs(wp) + np.abs(wm) <= 1 + 1e-15)
    ref = np.exp(1j * 3.0 * x) / 2
    wp, _ = scaled_exp(x, 3.0)
    assert np.allclose(wp, ref, atol=1e-15)

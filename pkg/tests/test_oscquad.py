import numpy as np
import pytest
from scipy.integrate import quad

from dirac_asym.oscquad import (
    SpectralPoint,
    gamma0,
    gamma0_profile,
    gamma_lq,
    gamma_tilde,
    lambda_big,
    osc_cell_moment,
    osc_profile,
    remainder_report,
    rho_remainder,
)
from dirac_asym.potential import PerturbationMatrix, PiecewisePoly, PiecewisePotential
from dirac_asym.grid import make_grid

pytestmark = pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")

# reference values for sigma1 = sigma2 = 1 from closed forms / mpmath quadrature
GAMMA1_Q2_MU5 = 0.14521722425999865  # (1/5) sqrt(1/2 - sin(10)/20)
GAMMA_TILDE_MU5 = 0.042176084443557479
LAMBDA_HALF_MU5 = 0.15082959702502843  # p = 1, so q = inf


def _quad_complex(f, a, b):
    re = quad(lambda t: f(t).real, a, b, limit=400, epsabs=1e-15, epsrel=1e-14)[0]
    im = quad(lambda t: f(t).imag, a, b, limit=400, epsabs=1e-15, epsrel=1e-14)[0]
    return re + 1j * im


@pytest.mark.parametrize("mu", [0.3, 7.0, 250 + 3j, 1e-9])
@pytest.mark.parametrize("sign", [1, -1])
def test_cell_moment_matches_quad(mu, sign):
    coeffs = [0.5, -1.0, 2.0, 0.25]
    a, b, anchor = 0.2, 0.45, 0.3
    p = np.polynomial.polynomial.Polynomial(coeffs)
    ref = _quad_complex(lambda t: np.exp(sign * 2j * mu * (t - anchor)) * p(t), a, b)
    assert abs(osc_cell_moment((a, b), coeffs, mu, sign, anchor) - ref) < 1e-13


def test_spectral_point_validation():
    with pytest.raises(ValueError):
        SpectralPoint(1.0, r=-1)
    with pytest.raises(ValueError):
        SpectralPoint(10 - 2j, r=1)
    assert SpectralPoint(10 - 1j, r=1).v_of_r == pytest.approx(np.exp(2))
    assert SpectralPoint(1.0, 0.0, 1.0).a_const == 2.0


def test_gamma_frozen_values(unit_pot):
    assert gamma_lq(unit_pot, 5.0, 1, q=2) == pytest.approx(GAMMA1_Q2_MU5, abs=1e-13)
    assert gamma_tilde(unit_pot, 5.0) == pytest.approx(GAMMA_TILDE_MU5, abs=1e-13)
    assert lambda_big(unit_pot, 5.0, 0.5) == pytest.approx(LAMBDA_HALF_MU5, abs=1e-12)


def test_gamma0_point_vs_profile(pl_pot):
    mu = 33 + 2j
    g = make_grid(pl_pot.mesh, mu)
    prof = osc_profile(pl_pot.sigma2, mu, g, backward=True)
    assert np.array_equal(gamma0_profile(pl_pot, mu, 2, g).values, prof.abs().values)
    for x in (0.0, 0.17, 0.4, 0.83, 1.0):
        assert gamma0(pl_pot, mu, 2, x) == pytest.approx(abs(prof(x)), abs=1e-13)


def test_zero_potential_remainders(zero_pot):
    rep = remainder_report(zero_pot, 17.0)
    for k, v in rep.scalars().items():
        assert v == (17.0**-2 if k == "rho" else 0.0), k


def test_rho_example():
    # sigma = 0, p11 = 1: k_P = int |P| (gamma01 + gamma02) = 0, so rho = |mu|^-2
    P = PerturbationMatrix(PiecewisePoly.constant(1.0), *(PiecewisePoly.zero() for _ in range(3)))
    assert rho_remainder(PiecewisePotential.zero(), P, 20.0) == pytest.approx(1 / 400)
    with pytest.raises(ValueError):
        rho_remainder(PiecewisePotential.zero(), P, 0.0)

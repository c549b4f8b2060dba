import numpy as np
import pytest

from dirac_asym.potential import PiecewisePoly, PiecewisePotential, random_piecewise_constant, random_piecewise_linear


@pytest.fixture(scope="session")
def unit_pot():
    return PiecewisePotential.constant(1.0, 1.0)


@pytest.fixture(scope="session")
def zero_pot():
    return PiecewisePotential.zero()


@pytest.fixture(scope="session")
def pl_pot():
    """Fixed two-cell piecewise-linear potential with a jump at 0.4."""
    mesh = np.array([0.0, 0.4, 1.0])
    s1 = PiecewisePoly(mesh, np.array([[0.3, 1.0], [-0.5, 0.2]]))
    s2 = PiecewisePoly(mesh, np.array([[1.0, -1.0], [0.7, 0.0]]))
    return PiecewisePotential(s1, s2)


@pytest.fixture(scope="session")
def pc_corpus():
    rng = np.random.default_rng(2024)
    return [random_piecewise_constant(rng) for _ in range(100)]


@pytest.fixture(scope="session")
def pl_corpus():
    rng = np.random.default_rng(7)
    return [random_piecewise_linear(rng) for _ in range(10)]

import numpy as np
import pytest

from dirac_asym.dirac import DiracContext
from dirac_asym.identities import EXACT_IDS, INEQUALITY_IDS, identity_eval


@pytest.mark.parametrize("name", EXACT_IDS + INEQUALITY_IDS)
def test_zero_potential_trivial(zero_pot, name):
    res = identity_eval(name, zero_pot, 7.0)
    assert res.residual <= 0.0 or res.residual < 1e-300
    assert res.passed()


@pytest.mark.parametrize("mu", [3.0, 5 + 2j, 40.0])
def test_exact_identities_unit(unit_pot, pl_pot, mu):
    for pot in (unit_pot, pl_pot):
        ctx = DiracContext(pot, mu)
        for name in EXACT_IDS:
            res = identity_eval(name, ctx)
            assert res.relative < 1e-11, (name, res)


def test_inequalities_hold(pl_pot):
    ctx = DiracContext(pl_pot, 10 - 0.5j, r=1.0)
    for name in INEQUALITY_IDS:
        res = identity_eval(name, ctx, d=1.0)
        assert res.passed(), (name, res)


def test_pointwise_evaluation(pl_pot):
    ctx = DiracContext(pl_pot, 6.0)
    for x in (0.0, 0.3, 1.0):
        assert identity_eval("ls2", ctx, x=x).passed()
        assert identity_eval("K1short", ctx, x=x).passed()


def test_unknown_identity(unit_pot):
    with pytest.raises(ValueError):
        identity_eval("nope", unit_pot, 3.0)

"""Asymptotics of fundamental solutions of 2x2 Dirac-type systems.

Solutions of ``y' + J y = i mu (diag(1, -1)) y`` with ``J = [[0, sigma1],
[sigma2, 0]]`` on [0, 1] are built from Neumann series of bounded integral
operators, compared against a direct ODE solver, and checked against their
large-``mu`` approximants.
"""
from .dirac import (
    TIERS,
    DiracContext,
    FundamentalSet,
    Profile,
    apply_K,
    approx_tier,
    cauchy_solutions,
    fundamental_set,
    fundamental_v,
    fundamental_w,
    neumann_solve,
    tier_error,
)
from .exceptions import ContractionFailure, DegenerateNormalizer, DiracAsymError, GateViolation, NonConvergence
from .grid import Grid, GridFunction, make_grid
from .identities import EXACT_IDS, INEQUALITY_IDS, identity_eval
from .kernels import BACKEND
from .oscquad import SpectralPoint, gamma0, gamma_lq, gamma_tilde, lambda_big, osc_cell_moment, rho_remainder
from .perturbed import apply_A, approx_first_order, perturbed_system, sl_fundamental, sl_reduce, solve_perturbed
from .potential import PerturbationMatrix, PiecewisePoly, PiecewisePotential, load_potential, save_potential
from .verify import SweepPlan, VerdictTable, run_identity_suite, run_sweep

__version__ = "0.1.0"

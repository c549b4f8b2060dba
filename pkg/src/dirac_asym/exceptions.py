"""Exception types shared across the package."""


class DiracAsymError(Exception):
    """Base class."""


class GateViolation(DiracAsymError):
    """The Neumann-series convergence gate ``a * gamma_j <= 1/2`` fails."""

    def __init__(self, j, gate, mu):
        super().__init__(f"gate a*gamma_{j} = {gate:.4g} > 0.5 at mu = {mu}")
        self.j = j
        self.gate = gate
        self.mu = mu


class NonConvergence(DiracAsymError):
    """The direct solver produced a non-finite or stagnating solution."""


class DegenerateNormalizer(DiracAsymError):
    """``|v2(0)|`` is too small to normalise the Cauchy solutions."""


class ContractionFailure(DiracAsymError):
    """The fixed-point iteration for the perturbed system does not contract."""

"""The 1/mu-perturbed Dirac system and the Sturm-Liouville reduction.

The perturbed system ``Y' + J Y = A_mu Y + P Y / mu`` is solved by the
fixed-point iteration ``Z = base + A_j Z / mu`` around the unperturbed
profiles.  In profile form, with ``W``, ``V`` the unperturbed profiles and
``z20 = V_2(0)``,

    q1 = (V2 p11 - V1 p21) Z1 + (V2 p12 - V1 p22) Z2
    q2 = (-W2 p11 + W1 p21) Z1 + (-W2 p12 + W1 p22) Z2
    A_1 Z = (W cum(q1) - V bwd(q2)) / z20
    A_2 Z = (W fwd(q1) - V tail(q2)) / z20

so the iteration never forms an exponential that can overflow.

The Sturm-Liouville equation ``y'' + (sigma' + mu^2) y = 0`` with sigma in
L^2 becomes such a system for ``d = S_1(mu)^{-1} (y, y^[1])`` with
``J = [[0, sigma], [sigma, 0]]`` and ``P = (i/2) sigma^2 [[1, 1], [-1, -1]]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirac import ApproximantTier, DiracContext, FundamentalSet, approx_tier, cauchy_solutions
from .exceptions import ContractionFailure
from .grid import MIN_SUBCELLS, GridFunction, bwd, cumint, fwd, make_grid, tailint
from .oracle import Coefficients, riccati_profiles
from .oscquad import rho_remainder
from .potential import (
    D_MAX,
    PerturbationMatrix,
    PiecewisePoly,
    PiecewisePotential,
    lp_norm,
)

MAX_ITER = 200


@dataclass
class PerturbedSystem:
    """Base potential, perturbation and the unperturbed fundamental set at mu."""

    pot: PiecewisePotential
    P: PerturbationMatrix
    mu: complex
    ctx: DiracContext
    fs: FundamentalSet
    tau_l1: float | None = None

    @property
    def grid(self):
        return self.ctx.grid

    def sampled_P(self):
        return self.ctx.memo("P", lambda: tuple(self.grid.sample(e) for e in self.P.entries()))


def perturbed_system(pot: PiecewisePotential, P: PerturbationMatrix, mu, density=1.0, r=None, min_sub=MIN_SUBCELLS) -> PerturbedSystem:
    mu = complex(mu)
    if mu == 0:
        raise ValueError("mu must be nonzero")
    mesh = np.union1d(pot.mesh, P.mesh)
    grid = make_grid(mesh, mu, density, min_sub=min_sub)
    ctx = DiracContext(pot, mu, grid, r=r)
    return PerturbedSystem(pot, P, mu, ctx, cauchy_solutions(ctx))


def _q(system: PerturbedSystem, Z):
    p11, p12, p21, p22 = system.sampled_P()
    W1, W2 = system.fs.w.pair()
    V1, V2 = system.fs.v.pair()
    Z1, Z2 = Z
    q1 = (V2 * p11 - V1 * p21) * Z1 + (V2 * p12 - V1 * p22) * Z2
    q2 = (-W2 * p11 + W1 * p21) * Z1 + (-W2 * p12 + W1 * p22) * Z2
    return q1, q2


def apply_A(system: PerturbedSystem, j: int, Z) -> tuple:
    """The integral operator A_j applied to a profile pair Z."""
    q1, q2 = _q(system, Z)
    lam = system.ctx.lam
    W1, W2 = system.fs.w.pair()
    V1, V2 = system.fs.v.pair()
    z20 = system.fs.z2_at_0
    if j == 1:
        a, b = cumint(q1), bwd(q2, lam)
    elif j == 2:
        a, b = fwd(q1, lam), tailint(q2)
    else:
        raise ValueError("j must be 1 or 2")
    return ((W1 * a - V1 * b) / z20, (W2 * a - V2 * b) / z20)


@dataclass
class PerturbedResult:
    Z: tuple
    iterations: int
    kind: str  # "W" (factor exp(i mu x)) or "V" (factor exp(i mu (1 - x)))
    mu: complex


def solve_perturbed(system: PerturbedSystem, which: str = "W", tol: float = 1e-13, max_iter: int = MAX_ITER) -> PerturbedResult:
    """Fixed point of Z = base + A_j Z / mu by plain iteration.

    Raises
    ------
    ContractionFailure
        If successive differences shrink by less than a factor 0.9.
    """
    j = 1 if which.upper() == "W" else 2
    base = system.fs.w.pair() if j == 1 else system.fs.v.pair()
    Z = base
    prev = None
    mu = system.mu
    for it in range(1, max_iter + 1):
        AZ = apply_A(system, j, Z)
        new = (base[0] + AZ[0] / mu, base[1] + AZ[1] / mu)
        diff = max((new[0] - Z[0]).sup(), (new[1] - Z[1]).sup())
        Z = new
        scale = max(Z[0].sup(), Z[1].sup(), 1.0)
        if diff <= tol * scale:
            return PerturbedResult(Z, it, which.upper(), mu)
        if prev is not None and diff > 0.9 * prev:
            raise ContractionFailure(f"contraction ratio {diff / prev:.3f} at mu={mu}")
        prev = diff
    raise ContractionFailure(f"no convergence in {max_iter} iterations at mu={mu}")


def operator_norm_estimate(system: PerturbedSystem, j: int, n_samples: int = 20, seed: int = 0) -> float:
    """Largest sup-norm gain of A_j over random inputs of unit sup norm."""
    rng = np.random.default_rng(seed)
    g = system.grid
    best = 0.0
    for _ in range(n_samples):
        pair = []
        for _ in range(2):
            # smooth random input: random cubic on each subcell
            v = rng.normal(size=(g.n_sub, 4)) + 1j * rng.normal(size=(g.n_sub, 4))
            u = (g.nodes - g.edges[:-1, None]) / g.widths[:, None]
            pair.append(sum(v[:, k : k + 1] * u**k for k in range(4)))
        s = max(np.abs(pair[0]).max(), np.abs(pair[1]).max())
        Z = (GridFunction(g, pair[0] / s), GridFunction(g, pair[1] / s))
        AZ = apply_A(system, j, Z)
        best = max(best, AZ[0].sup(), AZ[1].sup())
    return best


def approx_first_order(system: PerturbedSystem, which: str = "W") -> ApproximantTier:
    """First-order prediction of the perturbed profile, remainder rho(mu)."""
    ctx = system.ctx
    lam = ctx.lam
    mu = system.mu
    p11, p12, p21, p22 = system.sampled_P()
    rho = rho_remainder(system.pot, system.P, mu, system.grid)
    if which.upper() == "W":
        b1, b2 = approx_tier(ctx, "w-R").predicted
        gp21 = bwd(p21, lam)
        c11 = cumint(p11)
        pred = (b1 + (-ctx.f1 * gp21 + c11) / mu, b2 + (-gp21 + ctx.g2 * c11) / mu)
        return ApproximantTier("pert-W", pred, "rho", rho)
    b1, b2 = approx_tier(ctx, "v-R").predicted
    fp12 = fwd(p12, lam)
    t22 = tailint(p22)
    pred = (b1 + (-fp12 + ctx.f1 * t22) / mu, b2 + (ctx.g2 * fp12 - t22) / mu)
    return ApproximantTier("pert-V", pred, "rho", rho)


def profile_error(pred, exact) -> float:
    return max((pred[0] - exact[0]).sup(), (pred[1] - exact[1]).sup())


# ------------------------------------------------------------- SL layer ---


def poly_derivative(p: PiecewisePoly) -> PiecewisePoly:
    c = p.coeffs
    if c.shape[1] == 1:
        return PiecewisePoly(p.mesh, np.zeros_like(c))
    k = np.arange(1, c.shape[1])
    return PiecewisePoly(p.mesh, c[:, 1:] * k)


def poly_square(p: PiecewisePoly) -> PiecewisePoly:
    rows = [np.polynomial.polynomial.polymul(r, r) for r in p.coeffs]
    return PiecewisePoly(p.mesh, np.array(rows))


def _lobatto_project(p: PiecewisePoly, mesh, deg: int) -> PiecewisePoly:
    from .grid import lobatto

    u, _ = lobatto(deg + 1)
    rows = []
    for a, b in zip(mesh[:-1], mesh[1:]):
        t = a + (b - a) * u
        cell = p.cell_index(np.array([0.5 * (a + b)]))[0]
        vals = p.eval_cell(np.full(t.shape, cell), t)
        rows.append(np.polynomial.polynomial.polyfit(t, vals, deg))
    return PiecewisePoly(np.asarray(mesh, dtype=float), np.array(rows))


def square_capped(sigma: PiecewisePoly, d_max: int = D_MAX, rel_tol: float = 1e-13, max_split: int = 64) -> PiecewisePoly:
    """sigma^2 as a piecewise polynomial of degree <= d_max.

    When the exact square has higher degree it is re-interpolated at
    Lobatto points on a uniformly split mesh, splitting until the
    interpolation error at Gauss points is below ``rel_tol`` relative.
    """
    tau = poly_square(sigma)
    if tau.degree <= d_max:
        return tau
    scale = max(lp_norm(tau, np.inf), 1e-300)
    split = 1
    while True:
        mesh = np.concatenate(
            [np.linspace(a, b, split + 1)[:-1] for a, b in zip(sigma.mesh[:-1], sigma.mesh[1:])] + [[1.0]]
        )
        proj = _lobatto_project(tau, mesh, d_max)
        t, _, ref = proj.gauss_samples()
        err = np.max(np.abs(ref - tau(t)))
        if err <= rel_tol * scale or split >= max_split:
            return proj
        split *= 2


def sl_perturbation(sigma: PiecewisePoly) -> tuple[PiecewisePotential, PerturbationMatrix, float]:
    tau = square_capped(sigma)
    i2 = 0.5j
    P = PerturbationMatrix(tau.scaled(i2), tau.scaled(i2), tau.scaled(-i2), tau.scaled(-i2))
    pot = PiecewisePotential(sigma.refined(tau.mesh), sigma.refined(tau.mesh), 2.0, allow_p2=True)
    return pot, P, float(lp_norm(sigma, 2.0) ** 2)


def sl_reduce(sigma: PiecewisePoly, mu, density=1.0) -> PerturbedSystem:
    """Perturbed Dirac system equivalent to y'' + (sigma' + mu^2) y = 0."""
    mu = complex(mu)
    if mu == 0:
        raise ValueError("mu must be nonzero")
    pot, P, tau_l1 = sl_perturbation(sigma)
    # keep the subcell count per original cell when tau needed a finer mesh
    min_sub = max(2, -(-MIN_SUBCELLS * sigma.n_cells // pot.n_cells))
    system = perturbed_system(pot, P, mu, density, min_sub=min_sub)
    system.tau_l1 = tau_l1
    return system


def S1(mu) -> np.ndarray:
    mu = complex(mu)
    return np.array([[1.0, 0.0], [0.0, 1j * mu]]) @ np.array([[1.0, 1.0], [1.0, -1.0]])


def S1_inv(mu) -> np.ndarray:
    mu = complex(mu)
    return np.array([[1j * mu, 1.0], [1j * mu, -1.0]]) / (2j * mu)


@dataclass
class QuasiDerivativePair:
    """y and y^[1] = y' + sigma y as profiles with a common exponential factor.

    ``kind`` is ``"W"`` (factor exp(i mu x)) or ``"V"`` (exp(i mu (1 - x))).
    """

    y: GridFunction
    y_quasi: GridFunction
    kind: str
    mu: complex

    def factor(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * self.mu * x) if self.kind == "W" else np.exp(1j * self.mu * (1.0 - x))

    def derivative_profile(self, sigma_gf: GridFunction) -> GridFunction:
        """Profile of y' = y^[1] - sigma y."""
        return self.y_quasi - sigma_gf * self.y


def to_quasi(Z, kind, mu) -> QuasiDerivativePair:
    mu = complex(mu)
    return QuasiDerivativePair(Z[0] + Z[1], (Z[0] - Z[1]) * (1j * mu), kind, mu)


@dataclass
class SLResult:
    system: PerturbedSystem
    y1: QuasiDerivativePair
    y2: QuasiDerivativePair
    iterations: tuple


def sl_fundamental(sigma: PiecewisePoly, mu, density=1.0, tol=1e-13) -> SLResult:
    system = sl_reduce(sigma, mu, density)
    rw = solve_perturbed(system, "W", tol)
    rv = solve_perturbed(system, "V", tol)
    return SLResult(system, to_quasi(rw.Z, "W", mu), to_quasi(rv.Z, "V", mu), (rw.iterations, rv.iterations))


def sl_prediction(system: PerturbedSystem) -> tuple:
    """Explicit asymptotic profiles of y_1, y_2 (remainder rho)."""
    w = approx_first_order(system, "W").predicted
    v = approx_first_order(system, "V").predicted
    return w[0] + w[1], v[0] + v[1]


def quasi_residual(res: QuasiDerivativePair, sigma_gf: GridFunction) -> tuple[float, float]:
    """L^1 norms of the profile residuals of

        (y^[1])' - sigma y^[1] + (sigma^2 + mu^2) y = 0,    y' - y^[1] + sigma y = 0.
    """
    mu = res.mu
    Y, Q = res.y, res.y_quasi
    ph = 1j * mu if res.kind == "W" else -1j * mu
    r1 = Q.derivative() + ph * Q - sigma_gf * Q + (sigma_gf**2 + mu**2) * Y
    r2 = Y.derivative() + ph * Y - Q + sigma_gf * Y
    w = res.factor(Y.grid.nodes)
    l1 = lambda r: float((r.abs() * np.abs(w)).integral().real)
    return l1(r1), l1(r2)


def classical_oracle(sigma: PiecewisePoly, mu, grid) -> tuple:
    """y-profiles of the two solutions from y'' + (sigma' + mu^2) y = 0 directly.

    Requires sigma continuous so that q = sigma' is an ordinary function.
    The equation is written for ``e = S_1^{-1} (y, y')`` and shot with the
    Riccati solver; boundary data are converted from the quasi-derivative
    conditions of the perturbed system.
    """
    mu = complex(mu)
    q = poly_derivative(sigma)
    k = 1j / (2.0 * mu)
    ent = {"d11": [(q, k)], "d22": [(q, -k)], "m12": [(q, k)], "m21": [(q, -k)]}
    coef = Coefficients(sigma.mesh, ent, mu)
    (a, b), (p, qq) = riccati_profiles(coef, grid)
    s0, s1 = complex(sigma(np.array([0.0]))[0]), complex(sigma(np.array([1.0]))[0])
    c = 1.0 / (2j * mu)
    e2m = np.exp(2j * mu)
    B0, P1, Q0 = b.at0, p.at1, qq.at0
    # y1: profile e^{-i mu x} e = alpha (a, b) + beta e^{2 i mu (1 - x)} (p, q)
    #   d1(0) = e1 + s0 c (e1 + e2) = 1,  d2(1) = e2 - s1 c (e1 + e2) = 0
    M = np.array(
        [
            [1.0 + s0 * c * (1.0 + B0), s0 * c * e2m * Q0],
            [-s1 * c * a.at1, 1.0 - s1 * c * (P1 + 1.0)],
        ]
    )
    al, be = np.linalg.solve(M, [1.0, 0.0])
    E = GridFunction(grid, np.exp(2j * mu * (1.0 - grid.nodes)))
    y1 = (a + b) * al + (p + qq) * E * be
    # y2: profile e^{-i mu (1-x)} e = alpha e^{2 i mu x} (a, b) + beta (p, q)
    #   d1(0) = 0,  d2(1) = 1
    F = GridFunction(grid, np.exp(2j * mu * grid.nodes))
    M2 = np.array(
        [
            [1.0 + s0 * c * (1.0 + B0), s0 * c * Q0],
            [-s1 * c * e2m * a.at1, 1.0 - s1 * c * (P1 + 1.0)],
        ]
    )
    al2, be2 = np.linalg.solve(M2, [0.0, 1.0])
    y2 = (a + b) * F * al2 + (p + qq) * be2
    return y1, y2

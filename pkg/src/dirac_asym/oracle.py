"""Direct ODE solver used as an independent reference.

The solutions with mixed boundary data (first component fixed at 0, second
at 1) are computed by shooting a Riccati variable for the ratio of the two
components in its stable direction, together with the log-derivative of the
normalised component.  With

    y1' = (i mu + d11) y1 + m12 y2,
    y2' = m21 y1 + (-i mu + d22) y2,

write ``y = exp(i mu x) (a, b)`` for the w-type solution (a(0) = 1,
b(1) = 0) and ``y = exp(i mu (1 - x)) (p, q)`` for the v-type one (p(0) = 0,
q(1) = 1).  Then ``rho = b / a`` obeys

    rho' = m21 + (d22 - d11 - 2 i mu) rho - m12 rho^2,     rho(1) = 0,

integrated backwards, and ``psi = p / q`` obeys

    psi' = m12 + (2 i mu + d11 - d22) psi - m21 psi^2,     psi(0) = 0,

integrated forwards; both linear terms are damped in the direction of
integration when Im mu >= 0, so no exponential ever overflows.  The
integration restarts at every coefficient breakpoint.  Nothing here uses the
integral operators of :mod:`dirac_asym.dirac`.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import NonConvergence
from .grid import Grid, GridFunction, make_grid
from .potential import PerturbationMatrix, PiecewisePotential

RTOL = 1e-12
ATOL = 1e-14


class Coefficients:
    """Coefficient functions ``(d11, d22, m12, m21)`` evaluated per mesh cell."""

    def __init__(self, mesh, entries, mu):
        # entries: dict name -> list of (poly, scale) whose sum gives the coefficient
        self.mesh = np.asarray(mesh, dtype=float)
        self.entries = entries
        self.mu = complex(mu)

    def at(self, cell, t):
        out = []
        for name in ("d11", "d22", "m12", "m21"):
            v = 0j
            for poly, scale in self.entries.get(name, ()):
                v = v + scale * poly.eval_cell(poly.cell_index(self._mid(cell)), t)
            out.append(v)
        return out

    def _mid(self, cell):
        return 0.5 * (self.mesh[cell] + self.mesh[cell + 1])


def dirac_coefficients(pot: PiecewisePotential, mu, P: PerturbationMatrix | None = None) -> Coefficients:
    """Coefficients of y' + J y = A_mu y (+ P y / mu)."""
    mu = complex(mu)
    ent = {"m12": [(pot.sigma1, -1.0)], "m21": [(pot.sigma2, -1.0)]}
    mesh = pot.mesh
    if P is not None and not P.is_zero():
        mesh = np.union1d(mesh, P.mesh)
        ent["d11"] = [(P.p11, 1.0 / mu)]
        ent["d22"] = [(P.p22, 1.0 / mu)]
        ent["m12"].append((P.p12, 1.0 / mu))
        ent["m21"].append((P.p21, 1.0 / mu))
    return Coefficients(mesh, ent, mu)


def _cell_nodes(grid: Grid, mesh):
    """For each mesh cell, the sorted unique grid node positions inside it."""
    x = grid.nodes.ravel()
    out = []
    for a, b in zip(mesh[:-1], mesh[1:]):
        sel = x[(x >= a - 1e-15) & (x <= b + 1e-15)]
        out.append(np.unique(np.clip(sel, a, b)))
    return out


def _integrate(rhs, span, y0, t_eval):
    sol = solve_ivp(rhs, span, y0, method="DOP853", t_eval=t_eval, rtol=RTOL, atol=ATOL)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise NonConvergence(f"direct solver failed on {span}: {sol.message}")
    return sol.y


def riccati_profiles(coef: Coefficients, grid: Grid):
    """(a, b) and (p, q) profiles at every grid node.

    Returns two pairs of GridFunction: the w-type profile ``exp(-i mu x) y``
    and the v-type profile ``exp(-i mu (1 - x)) y``.
    """
    mu = coef.mu
    mesh = coef.mesh
    nodes = _cell_nodes(grid, mesh)
    tri = 2j * mu
    n_cells = len(mesh) - 1
    # backward sweep for rho and int_x^1 (d11 + m12 rho)
    rho_at, lam_at = {}, {}
    state = np.array([0j, 0j])
    for c in range(n_cells - 1, -1, -1):
        a, b = mesh[c], mesh[c + 1]

        def rhs(t, y, c=c):
            d11, d22, m12, m21 = coef.at(c, t)
            r = y[0]
            return [m21 + (d22 - d11 - tri) * r - m12 * r * r, -(d11 + m12 * r)]

        te = nodes[c][::-1]
        ys = _integrate(rhs, (b, a), state, te)
        for t, r, l in zip(te, ys[0], ys[1]):
            rho_at[t], lam_at[t] = r, l
        state = ys[:, -1].copy() if te[-1] == a else _integrate(rhs, (b, a), state, [a])[:, -1]
    # forward sweep for psi and int_0^x (d22 + m21 psi)
    psi_at, kap_at = {}, {}
    state = np.array([0j, 0j])
    for c in range(n_cells):
        a, b = mesh[c], mesh[c + 1]

        def rhs(t, y, c=c):
            d11, d22, m12, m21 = coef.at(c, t)
            p = y[0]
            return [m12 + (tri + d11 - d22) * p - m21 * p * p, d22 + m21 * p]

        te = nodes[c]
        ys = _integrate(rhs, (a, b), state, te)
        for t, p, k in zip(te, ys[0], ys[1]):
            psi_at[t], kap_at[t] = p, k
        state = ys[:, -1].copy() if te[-1] == b else _integrate(rhs, (a, b), state, [b])[:, -1]
    x = grid.nodes.ravel()
    xs = np.clip(x, 0.0, 1.0)
    lookup = lambda d: np.array([d[_nearest(d, t)] for t in xs])
    rho = lookup(rho_at)
    lam_int = lookup(lam_at)  # = -int_1^x h = int_x^1 h, sign handled below
    psi = lookup(psi_at)
    kap = lookup(kap_at)
    # lam_int holds int_1^x -(h) dt integrated backwards = int_x^1 h dt
    A = np.exp(lam_at[_nearest(lam_at, 0.0)] - lam_int)
    Q = np.exp(kap - kap_at[_nearest(kap_at, 1.0)])
    W = (GridFunction(grid, A), GridFunction(grid, rho * A))
    V = (GridFunction(grid, psi * Q), GridFunction(grid, Q))
    return W, V


def _nearest(d, t):
    if t in d:
        return t
    keys = np.fromiter(d.keys(), float)
    return keys[np.argmin(np.abs(keys - t))]


def direct_profiles(pot: PiecewisePotential, mu, grid: Grid | None = None, P: PerturbationMatrix | None = None):
    """Reference profiles ``(W, V)`` of w and v (optionally with perturbation P)."""
    coef = dirac_coefficients(pot, mu, P)
    grid = grid or make_grid(coef.mesh, mu)
    return riccati_profiles(coef, grid)


def solve_direct(pot: PiecewisePotential, mu, C1: complex = 1.0, C2: complex = 0.0, grid: Grid | None = None):
    """Solution of the boundary form with constants C1, C2, i.e. ``C1 w + C2 v``.

    Returns the two components as GridFunction of actual values.
    """
    mu = complex(mu)
    W, V = direct_profiles(pot, mu, grid)
    x = W[0].grid.nodes
    ew = np.exp(1j * mu * x)
    ev = np.exp(1j * mu * (1.0 - x))
    return (W[0] * ew * C1 + V[0] * ev * C2, W[1] * ew * C1 + V[1] * ev * C2)


def system_residual(pot: PiecewisePotential, mu, y1: GridFunction, y2: GridFunction) -> float:
    """Plug-back residual of y1' + sigma1 y2 - i mu y1 and y2' + sigma2 y1 + i mu y2.

    Derivatives come from the per-subcell interpolant, so the residual is
    meaningful when sigma is smooth on every subcell.
    """
    g = y1.grid
    s1, s2 = g.sample(pot.sigma1), g.sample(pot.sigma2)
    mu = complex(mu)
    r1 = y1.derivative() + s1 * y2 - 1j * mu * y1
    r2 = y2.derivative() + s2 * y1 + 1j * mu * y2
    scale = max(y1.sup(), y2.sup(), 1e-300)
    return max(r1.sup(), r2.sup()) / scale

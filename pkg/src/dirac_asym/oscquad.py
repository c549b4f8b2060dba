"""Oscillatory moments of piecewise polynomials and the remainder functionals.

Everything here is built from exact per-interval moments

    int_a^b exp(lam (t - anchor)) p(t) dt,     lam = +-2 i mu,

evaluated in closed form (or by a short power series when ``|lam| h`` is
small).  The profiles gamma_{0,j}(x, mu) are assembled on the nodes of a
:class:`~dirac_asym.grid.Grid` by chaining moments between consecutive
nodes, which is a different route from the Gauss-weighted running integrals
in :mod:`dirac_asym.grid`; the two are compared in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import kernels
from .grid import Grid, GridFunction, make_grid
from .potential import PerturbationMatrix, PiecewisePoly, PiecewisePotential, sigma_max_norm

SERIES_THRESHOLD = 1.0
_SERIES_MAX = 60


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter with its half-plane offset and Neumann constant.

    ``sigma_norm`` is the L^p norm of the envelope ``max(|sigma1|, |sigma2|)``.
    Points on the boundary line ``Im mu = -r`` are accepted.
    """

    mu: complex
    r: float = 0.0
    sigma_norm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", complex(self.mu))
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if self.mu.imag < -self.r - 1e-12:
            raise ValueError(f"Im mu = {self.mu.imag} below the half-plane bound {-self.r}")

    @classmethod
    def for_potential(cls, mu, r, pot: PiecewisePotential):
        return cls(mu, r, sigma_max_norm(pot, pot.p_exponent))

    @property
    def v_of_r(self) -> float:
        return 1.0 if self.r < 0 else float(np.exp(2.0 * self.r))

    @property
    def a_const(self) -> float:
        return 2.0 * self.v_of_r**2 * self.sigma_norm**3


def _shift_coeffs(coeffs, c):
    """Coefficients of p(c + u) in powers of u, for rows of global monomials."""
    coeffs = np.asarray(coeffs, dtype=complex)
    d = coeffs.shape[-1]
    c = np.asarray(c, dtype=float)[..., None]
    out = np.zeros_like(coeffs)
    for k in range(d):
        # coefficient of u^k: sum_{m>=k} C(m, k) a_m c^{m-k}
        acc = 0
        for m in range(k, d):
            binom = factorial(m) // (factorial(k) * factorial(m - k))
            acc = acc + binom * coeffs[..., m : m + 1] * c ** (m - k)
        out[..., k : k + 1] = acc
    return out


def _monomial_moments(lam, lo, hi, kmax):
    """M[..., k] = int_lo^hi exp(lam u) u^k du, one of lo, hi being zero.

    ``lam`` is complex scalar; ``lo``/``hi`` arrays with ``|lam| * (hi - lo)``
    arbitrary.  The nonzero end is where ``exp(lam u)`` is smallest in
    modulus, so the closed form never overflows.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    h = hi - lo
    out = np.zeros(lo.shape + (kmax + 1,), dtype=complex)
    small = np.abs(lam) * h < SERIES_THRESHOLD
    if np.any(small):
        l_, h_ = lo[small], hi[small]
        for k in range(kmax + 1):
            acc = np.zeros(l_.shape, dtype=complex)
            term_hi = h_ ** (k + 1) + 0j
            term_lo = l_ ** (k + 1) + 0j
            coef = 1.0 + 0j
            for n in range(_SERIES_MAX):
                t = coef * (term_hi - term_lo) / (n + k + 1)
                acc = acc + t
                if n >= 10 and np.all(np.abs(t) <= 1e-17 * np.maximum(np.abs(acc), 1e-300)):
                    break
                coef = coef * lam / (n + 1)
                term_hi = term_hi * h_
                term_lo = term_lo * l_
            out[small, k] = acc
    big = ~small
    if np.any(big):
        l_, h_ = lo[big], hi[big]

        def anti(u):
            # e^{lam u} sum_m (-1)^m k!/(k-m)! u^{k-m} / lam^{m+1}
            e = np.exp(lam * u)
            res = np.empty(u.shape + (kmax + 1,), dtype=complex)
            for k in range(kmax + 1):
                s = 0
                for m in range(k + 1):
                    s = s + (-1) ** m * (factorial(k) // factorial(k - m)) * u ** (k - m) / lam ** (m + 1)
                res[..., k] = e * s
            return res

        out[big] = anti(h_) - anti(l_)
    return out


def osc_moments(coeffs, a, b, mu, sign, anchor):
    """Vectorised ``int_a^b exp(sign 2 i mu (t - anchor)) p(t) dt``.

    ``coeffs`` has one row of global-monomial coefficients per interval.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    a = np.broadcast_to(np.asarray(a, dtype=float), coeffs.shape[:1])
    b = np.broadcast_to(np.asarray(b, dtype=float), coeffs.shape[:1])
    anchor = np.broadcast_to(np.asarray(anchor, dtype=float), coeffs.shape[:1])
    lam = sign * 2j * complex(mu)
    if not np.any(coeffs):
        return np.zeros(coeffs.shape[0], dtype=complex)
    if lam == 0:
        k = np.arange(coeffs.shape[1])
        return np.sum(coeffs * (b[:, None] ** (k + 1) - a[:, None] ** (k + 1)) / (k + 1), axis=1)
    c = np.where(lam.real > 0, b, a)
    local = _shift_coeffs(coeffs, c)
    mom = _monomial_moments(lam, a - c, b - c, coeffs.shape[1] - 1)
    s = np.sum(local * mom, axis=1)
    # zero rows stay zero even where the exponential overflows
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(lam * (c - anchor)) * s
    return np.where(s == 0, 0.0, out)


def osc_cell_moment(cell, poly_coeffs, mu, sign=1, anchor=0.0) -> complex:
    """``int_cell exp(sign 2 i mu (t - anchor)) p(t) dt`` for one cell.

    Parameters
    ----------
    cell : (float, float)
        Interval ``(a, b)``.
    poly_coeffs : array_like
        Global-monomial coefficients of ``p``, low degree first.
    mu : complex
    sign : {+1, -1}
    anchor : float

    Examples
    --------
    >>> round(abs(osc_cell_moment((0, 1), [1.0], 1j, 1, 1.0)), 6)
    3.194528
    """
    a, b = cell
    return complex(osc_moments([poly_coeffs], a, b, mu, sign, anchor)[0])


def _node_intervals(grid: Grid, poly: PiecewisePoly):
    x = grid.nodes.ravel()
    a, b = x[:-1], x[1:]
    cell = poly.cell_index(0.5 * (a + b))
    return a, b, poly.coeffs[cell]


def osc_profile(poly: PiecewisePoly, mu, grid: Grid, backward=False) -> GridFunction:
    """Nodal values of the convolution-type oscillatory integral.

    forward:  ``int_0^x exp(2 i mu (x - t)) p(t) dt``
    backward: ``int_x^1 exp(2 i mu (t - x)) p(t) dt``
    """
    key = ("osc", id(poly), bool(backward), complex(mu))
    hit = grid._cache.get(key)
    if hit is not None and hit[0] is poly:
        return hit[1]
    a, b, co = _node_intervals(grid, poly)
    lam = 2j * complex(mu)
    if backward:
        mom = osc_moments(co, a, b, mu, +1, a)
        phase = np.exp(lam * (b - a))
        loc = np.concatenate((mom, [0.0]))[:, None]
        ph = np.concatenate((phase, [1.0]))[:, None]
    else:
        mom = osc_moments(co, a, b, mu, -1, b)
        phase = np.exp(lam * (b - a))
        loc = np.concatenate(([0.0], mom))[:, None]
        ph = np.concatenate(([1.0], phase))[:, None]
    loc = np.ascontiguousarray(loc, dtype=complex)
    ph = np.ascontiguousarray(ph, dtype=complex)
    idx = np.arange(loc.shape[0], dtype=np.intp)
    if backward:
        # F_i = e^{lam (x_{i+1} - x_i)} F_{i+1} + m_i
        out = kernels.running_backward(loc, ph, idx)
    else:
        out = kernels.running_forward(loc, ph, idx)
    gf = GridFunction(grid, out[:, 0])
    grid._cache[key] = (poly, gf)
    return gf


def plain_profile(poly: PiecewisePoly, mu, grid: Grid, sign: int) -> GridFunction:
    """Nodal values of ``int_0^x exp(sign 2 i mu t) p(t) dt``."""
    a, b, co = _node_intervals(grid, poly)
    mom = osc_moments(co, a, b, mu, sign, 0.0)
    return GridFunction(grid, np.concatenate(([0.0], np.cumsum(mom))))


def default_grid(pot: PiecewisePotential, mu, density=1.0, P: PerturbationMatrix | None = None) -> Grid:
    mesh = pot.mesh if P is None else np.union1d(pot.mesh, P.mesh)
    return make_grid(mesh, mu, density)


def gamma0_profile(pot: PiecewisePotential, mu, j: int, grid: Grid | None = None) -> GridFunction:
    """Modulus profile x -> gamma_{0,j}(x, mu) on the grid nodes."""
    grid = grid or default_grid(pot, mu)
    if j == 1:
        return osc_profile(pot.sigma1, mu, grid, backward=False).abs()
    if j == 2:
        return osc_profile(pot.sigma2, mu, grid, backward=True).abs()
    raise ValueError("j must be 1 or 2")


def gamma0(pot: PiecewisePotential, mu, j: int, x: float) -> float:
    """gamma_{0,j}(x, mu) at one point, from cell moments and a partial cell."""
    x = float(x)
    poly = pot.sigma1 if j == 1 else pot.sigma2
    m = poly.mesh
    if j == 1:
        a = m[:-1]
        b = np.minimum(m[1:], x)
        keep = b > a
        val = osc_moments(poly.coeffs[keep], a[keep], b[keep], mu, -1, x).sum()
    elif j == 2:
        a = np.maximum(m[:-1], x)
        b = m[1:]
        keep = b > a
        val = osc_moments(poly.coeffs[keep], a[keep], b[keep], mu, +1, x).sum()
    else:
        raise ValueError("j must be 1 or 2")
    return float(abs(val))


def gamma_lq(pot: PiecewisePotential, mu, j: int, q=None, grid: Grid | None = None) -> float:
    """L^q norm of gamma_{0,j}(., mu); ``q`` defaults to the conjugate exponent."""
    q = pot.q_exponent if q is None else q
    return gamma0_profile(pot, mu, j, grid).lq_norm(q)


def gamma_tilde(pot: PiecewisePotential, mu, grid: Grid | None = None) -> float:
    grid = grid or default_grid(pot, mu)
    g1 = gamma0_profile(pot, mu, 1, grid)
    g2 = gamma0_profile(pot, mu, 2, grid)
    s1 = grid.sample(pot.sigma1).abs()
    s2 = grid.sample(pot.sigma2).abs()
    return float((s2 * g1**2 + s1 * g2**2).integral().real)


def lambda_profile(pot: PiecewisePotential, mu, grid: Grid | None = None) -> GridFunction:
    """x -> gamma~ + gamma_1^2 + gamma_2^2 + gamma_{0,1}(x)^2 + gamma_{0,2}(x)^2."""
    grid = grid or default_grid(pot, mu)
    q = pot.q_exponent
    g1 = gamma0_profile(pot, mu, 1, grid)
    g2 = gamma0_profile(pot, mu, 2, grid)
    const = gamma_tilde(pot, mu, grid) + g1.lq_norm(q) ** 2 + g2.lq_norm(q) ** 2
    return g1**2 + g2**2 + const


def lambda_big(pot: PiecewisePotential, mu, x: float) -> float:
    grid = default_grid(pot, mu)
    q = pot.q_exponent
    const = gamma_tilde(pot, mu, grid) + gamma_lq(pot, mu, 1, q, grid) ** 2 + gamma_lq(pot, mu, 2, q, grid) ** 2
    return float(const + gamma0(pot, mu, 1, x) ** 2 + gamma0(pot, mu, 2, x) ** 2)


def alpha_functionals(pot: PiecewisePotential, mu, grid: Grid | None = None):
    """Strip remainders: (alpha_0 profile, its L^q norm, envelope-weighted alpha~)."""
    grid = grid or default_grid(pot, mu)
    prof = None
    for s in (pot.sigma1, pot.sigma2):
        for sign in (-1, 1):
            term = plain_profile(s, mu, grid, sign).abs()
            prof = term if prof is None else prof + term
    env = GridFunction(grid, pot.envelope(grid.nodes))
    alpha_q = prof.lq_norm(pot.q_exponent)
    alpha_t = float((env * prof**2).integral().real)
    return prof, alpha_q, alpha_t


def k_perturbation(pot: PiecewisePotential, P: PerturbationMatrix, mu, grid: Grid | None = None) -> float:
    """int_0^1 ||P(t)|| (gamma_{0,1} + gamma_{0,2})(t) dt with the spectral norm."""
    grid = grid or default_grid(pot, mu, P=P)
    nrm = GridFunction(grid, P.norm(grid.nodes))
    g = gamma0_profile(pot, mu, 1, grid) + gamma0_profile(pot, mu, 2, grid)
    return float((nrm * g).integral().real)


def rho_remainder(pot: PiecewisePotential, P: PerturbationMatrix | None, mu, grid: Grid | None = None) -> float:
    """|mu|^-1 k_P + gamma_1^2 + gamma_2^2 + gamma~ + |mu|^-2."""
    mu = complex(mu)
    if mu == 0:
        raise ValueError("rho is undefined at mu = 0")
    grid = grid or default_grid(pot, mu, P=P)
    q = pot.q_exponent
    kp = 0.0 if P is None or P.is_zero() else k_perturbation(pot, P, mu, grid)
    g1 = gamma_lq(pot, mu, 1, q, grid)
    g2 = gamma_lq(pot, mu, 2, q, grid)
    return float(kp / abs(mu) + g1**2 + g2**2 + gamma_tilde(pot, mu, grid) + abs(mu) ** -2)


@dataclass
class RemainderReport:
    """All remainder functionals at one spectral point, plus measured ratios."""

    mu: complex
    gamma01_profile: GridFunction
    gamma02_profile: GridFunction
    gamma1: float
    gamma2: float
    gamma_tilde: float
    alpha_q: float
    alpha_tilde: float
    lambda_sup: float
    rho: float
    k_P: float
    measured_errors: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)

    def record(self, tier: str, error: float, remainder: float):
        self.measured_errors[tier] = float(error)
        self.ratios[tier] = float(error / remainder) if remainder > 0 else float("inf")

    def scalars(self) -> dict:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma_tilde": self.gamma_tilde,
            "alpha_q": self.alpha_q,
            "alpha_tilde": self.alpha_tilde,
            "lambda_sup": self.lambda_sup,
            "rho": self.rho,
            "k_P": self.k_P,
        }


def remainder_report(pot: PiecewisePotential, mu, P: PerturbationMatrix | None = None, grid: Grid | None = None):
    grid = grid or default_grid(pot, mu, P=P)
    q = pot.q_exponent
    g1p = gamma0_profile(pot, mu, 1, grid)
    g2p = gamma0_profile(pot, mu, 2, grid)
    _, aq, at = alpha_functionals(pot, mu, grid)
    kp = 0.0 if P is None or P.is_zero() else k_perturbation(pot, P, mu, grid)
    return RemainderReport(
        mu=complex(mu),
        gamma01_profile=g1p,
        gamma02_profile=g2p,
        gamma1=g1p.lq_norm(q),
        gamma2=g2p.lq_norm(q),
        gamma_tilde=gamma_tilde(pot, mu, grid),
        alpha_q=aq,
        alpha_tilde=at,
        lambda_sup=lambda_profile(pot, mu, grid).sup(),
        rho=rho_remainder(pot, P, mu, grid),
        k_P=kp,
    )

"""Integral operators K1, K2, the Neumann-series solver and the fundamental system.

All solutions are stored as *profiles*: the solution divided by its
leading exponential,

    W = exp(-i mu x) w,     V = exp(-i mu (1 - x)) v,     S = exp(i mu x) s,

and the Cauchy solution ``c`` as a two-exponential sum
``A exp(i mu x) + B exp(-i mu x)``.  Every profile stays bounded for
``Im mu`` large, so nothing overflows; actual solution values are only
formed on request.

With ``f1 = int_0^x exp(2 i mu (x - t)) sigma1`` and
``g2 = int_x^1 exp(2 i mu (t - x)) sigma2`` the operators reduce to

    K1 z = cum(sigma1 * bwd(sigma2 z)),   K2 z = tail(sigma2 * fwd(sigma1 z)),

where ``fwd``/``bwd`` are the exponentially weighted running integrals of
:mod:`dirac_asym.grid` with rate ``2 i mu``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateNormalizer, GateViolation, NonConvergence
from .grid import Grid, GridFunction, bwd, cumint, fwd, make_grid, scaled_exp, tailint
from .oscquad import (
    SpectralPoint,
    gamma0_profile,
    gamma_tilde,
    lambda_profile,
)
from .potential import PiecewisePotential, lp_norm, sigma_max_norm

MAX_TERMS = 64
DEFAULT_TOL = 1e-13


class DiracContext:
    """Sampled coefficients and cached building blocks at one (pot, mu, grid)."""

    def __init__(self, pot: PiecewisePotential, mu, grid: Grid | None = None, r: float | None = None, density=1.0):
        self.pot = pot
        self.mu = complex(mu)
        # default offset: the smallest half-plane containing mu
        self.r = max(0.0, -self.mu.imag) if r is None else float(r)
        self.grid = grid or make_grid(pot.mesh, self.mu, density)
        self.lam = 2j * self.mu
        self.s1 = self.grid.sample(pot.sigma1)
        self.s2 = self.grid.sample(pot.sigma2)
        self.e = self.grid.constant(1.0)
        self._memo: dict = {}

    def memo(self, key, fn):
        if key not in self._memo:
            self._memo[key] = fn()
        return self._memo[key]

    @property
    def f1(self) -> GridFunction:
        """int_0^x exp(2 i mu (x - t)) sigma1(t) dt."""
        return self.memo("f1", lambda: fwd(self.s1, self.lam))

    @property
    def g2(self) -> GridFunction:
        """int_x^1 exp(2 i mu (t - x)) sigma2(t) dt."""
        return self.memo("g2", lambda: bwd(self.s2, self.lam))

    @property
    def point(self) -> SpectralPoint:
        return self.memo("pt", lambda: SpectralPoint(self.mu, self.r, sigma_max_norm(self.pot, self.pot.p_exponent)))

    def gamma0(self, j) -> GridFunction:
        return self.memo(("g0", j), lambda: gamma0_profile(self.pot, self.mu, j, self.grid))

    def gamma(self, j) -> float:
        return self.memo(("g", j), lambda: self.gamma0(j).lq_norm(self.pot.q_exponent))

    @property
    def gamma_tilde(self) -> float:
        return self.memo("gt", lambda: gamma_tilde(self.pot, self.mu, self.grid))

    @property
    def lam_profile(self) -> GridFunction:
        return self.memo("Lam", lambda: lambda_profile(self.pot, self.mu, self.grid))

    def Ke(self, j) -> GridFunction:
        return self.memo(("Ke", j), lambda: apply_K(self, j, self.e))

    def K2e(self, j) -> GridFunction:
        return self.memo(("KKe", j), lambda: apply_K(self, j, self.Ke(j)))


def _ctx(pot_or_ctx, mu=None, grid=None) -> DiracContext:
    if isinstance(pot_or_ctx, DiracContext):
        return pot_or_ctx
    return DiracContext(pot_or_ctx, mu, grid)


def apply_K(ctx, j: int, z: GridFunction, mu=None) -> GridFunction:
    """K_j z on the grid of ``z``; ``ctx`` is a DiracContext or a potential."""
    ctx = _ctx(ctx, mu, z.grid)
    if z.grid is not ctx.grid:
        raise ValueError("z lives on a different grid than the context")
    if j == 1:
        return cumint(ctx.s1 * bwd(ctx.s2 * z, ctx.lam))
    if j == 2:
        return tailint(ctx.s2 * fwd(ctx.s1 * z, ctx.lam))
    raise ValueError("j must be 1 or 2")


def apply_K_part(ctx, part: int, z: GridFunction, mu=None) -> GridFunction:
    """Split operators K_{1,1}, K_{1,2}, K_{2,1}, K_{2,2} (``part`` = 11, 12, 21, 22)."""
    ctx = _ctx(ctx, mu, z.grid)
    if part == 11:
        return cumint(ctx.s2 * ctx.f1 * z)
    if part == 12:
        return bwd(ctx.s2 * z, ctx.lam) * ctx.f1
    if part == 21:
        return tailint(ctx.s1 * ctx.g2 * z)
    if part == 22:
        return fwd(ctx.s1 * z, ctx.lam) * ctx.g2
    raise ValueError("part must be one of 11, 12, 21, 22")


@dataclass
class NeumannResult:
    z: GridFunction
    terms_used: int
    gate: float
    converged: bool = True


def neumann_solve(ctx, j: int, tol: float = DEFAULT_TOL, check_gate: bool = True, mu=None) -> NeumannResult:
    """z_j = sum_n (-1)^n K_j^n e, truncated by the geometric tail bound.

    Raises
    ------
    GateViolation
        If ``check_gate`` and ``a * gamma_j > 1/2``.
    NonConvergence
        If the terms stop decreasing before reaching the tolerance.
    """
    ctx = _ctx(ctx, mu)
    gate = ctx.point.a_const * ctx.gamma(j)
    if check_gate and gate > 0.5:
        raise GateViolation(j, gate, ctx.mu)
    thresh = tol * max(1.0 - gate, 0.5)
    term = ctx.e
    z = ctx.e
    n = 1
    prev = np.inf
    while n < MAX_TERMS:
        size = term.sup()
        if size < thresh:
            break
        if not np.isfinite(size) or (n > 8 and size > prev):
            raise NonConvergence(f"Neumann series for z_{j} diverges at mu={ctx.mu}")
        prev = size
        term = -apply_K(ctx, j, term)
        z = z + term
        n += 1
    return NeumannResult(z, n, gate, term.sup() < thresh)


@dataclass
class Profile:
    """A solution pair divided by its leading exponential.

    ``kind`` is ``"w"`` (factor exp(i mu x)), ``"v"`` (exp(i mu (1 - x)))
    or ``"s"`` (exp(-i mu x)).
    """

    first: GridFunction
    second: GridFunction
    kind: str
    mu: complex
    method: str = "neumann"
    gate: float = 0.0
    terms: int = 0

    def factor(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "w":
            return np.exp(1j * self.mu * x)
        if self.kind == "v":
            return np.exp(1j * self.mu * (1.0 - x))
        return np.exp(-1j * self.mu * x)

    def values(self):
        """Actual solution components (may overflow for huge |Im mu|)."""
        f = self.factor(self.first.grid.nodes)
        return self.first * f, self.second * f

    def __call__(self, x):
        f = self.factor(x)
        return self.first(x) * f, self.second(x) * f

    def pair(self):
        return self.first, self.second


def _gated(ctx, j, tol, fallback):
    try:
        res = neumann_solve(ctx, j, tol)
        return res.z, "neumann", res.gate, res.terms_used
    except (GateViolation, NonConvergence) as exc:
        if not fallback:
            raise
        gate = exc.gate if isinstance(exc, GateViolation) else float("nan")
        return None, "direct", gate, 0


def fundamental_w(ctx, mu=None, tol: float = DEFAULT_TOL, fallback: bool = True) -> Profile:
    """Profile of w (w1(0) = 1, w2(1) = 0): (z1, bwd(sigma2 z1))."""
    ctx = _ctx(ctx, mu)
    z, method, gate, terms = _gated(ctx, 1, tol, fallback)
    if z is None:
        from .oracle import direct_profiles

        W, _ = direct_profiles(ctx.pot, ctx.mu, ctx.grid)
        return Profile(W[0], W[1], "w", ctx.mu, method, gate, terms)
    return Profile(z, bwd(ctx.s2 * z, ctx.lam), "w", ctx.mu, method, gate, terms)


def fundamental_v(ctx, mu=None, tol: float = DEFAULT_TOL, fallback: bool = True) -> Profile:
    """Profile of v (v1(0) = 0, v2(1) = 1): (-fwd(sigma1 z2), z2)."""
    ctx = _ctx(ctx, mu)
    z, method, gate, terms = _gated(ctx, 2, tol, fallback)
    if z is None:
        from .oracle import direct_profiles

        _, V = direct_profiles(ctx.pot, ctx.mu, ctx.grid)
        return Profile(V[0], V[1], "v", ctx.mu, method, gate, terms)
    return Profile(-fwd(ctx.s1 * z, ctx.lam), z, "v", ctx.mu, method, gate, terms)


@dataclass
class TwoExp:
    """Pair of functions ``A_k exp(i mu x) + B_k exp(-i mu x)``, k = 1, 2."""

    A: tuple
    B: tuple
    mu: complex

    def values(self):
        g = self.A[0].grid
        ep = np.exp(1j * self.mu * g.nodes)
        em = np.exp(-1j * self.mu * g.nodes)
        return tuple(a * ep + b * em for a, b in zip(self.A, self.B))

    def normalized(self, k):
        """Component k divided by |exp(i mu x)| + |exp(-i mu x)|."""
        g = self.A[k].grid
        wp, wm = scaled_exp(g.nodes, self.mu)
        return self.A[k] * wp + self.B[k] * wm

    def at0(self):
        return tuple(a.at0 + b.at0 for a, b in zip(self.A, self.B))


@dataclass
class FundamentalSet:
    """w, v, c, s in profile form with boundary data and the Wronskian."""

    w: Profile
    v: Profile
    c: TwoExp
    s: Profile
    z2_at_0: complex
    w2_at_0: complex
    v2_at_0: complex
    det_profile: GridFunction
    info: dict = field(default_factory=dict)

    def boundary_residuals(self) -> dict:
        c0 = self.c.at0()
        return {
            "w1(0)-1": abs(self.w.first.at0 - 1.0),
            "w2(1)": abs(self.w.second.at1),
            "v1(0)": abs(self.v.first.at0),
            "v2(1)-1": abs(self.v.second.at1 - 1.0),
            "c1(0)-1": abs(c0[0] - 1.0),
            "c2(0)": abs(c0[1]),
            "s1(0)": abs(self.s.first.at0),
            "s2(0)-1": abs(self.s.second.at0 - 1.0),
        }

    def det_variation(self) -> float:
        """max |det D(x) / v2(0) - 1| over the grid."""
        return float(np.max(np.abs(self.det_profile.values / self.v2_at_0 - 1.0)))


def cauchy_from_profiles(W: Profile, V: Profile, mu, info=None) -> FundamentalSet:
    mu = complex(mu)
    z20 = V.second.at0
    if abs(z20) < 1e-8:
        raise DegenerateNormalizer(f"|v2(0) exp(-i mu)| = {abs(z20):.3e} at mu={mu}")
    w20 = W.second.at0
    beta = -w20 / z20
    c = TwoExp((W.first, W.second), (V.first * beta, V.second * beta), mu)
    s = Profile(V.first / z20, V.second / z20, "s", mu, V.method, V.gate, V.terms)
    wr = W.first * V.second - W.second * V.first
    eimu = np.exp(1j * mu)
    return FundamentalSet(W, V, c, s, z20, w20, eimu * z20, wr * eimu, dict(info or {}))


def cauchy_solutions(ctx, mu=None, tol: float = DEFAULT_TOL, fallback: bool = True) -> FundamentalSet:
    """c = w - (w2(0)/v2(0)) v and s = v / v2(0), plus w, v themselves."""
    ctx = _ctx(ctx, mu)
    W = fundamental_w(ctx, tol=tol, fallback=fallback)
    V = fundamental_v(ctx, tol=tol, fallback=fallback)
    return cauchy_from_profiles(W, V, ctx.mu, {"w": W.method, "v": V.method})


fundamental_set = cauchy_solutions


# ------------------------------------------------------------ approximants ---

TIERS = ("w-R", "w-S", "w-T", "v-R", "v-S", "v-T", "main1-c", "main1-s", "corKsq")


@dataclass
class ApproximantTier:
    """Predicted profile pair with the remainder functional it is measured against.

    ``reading`` is ``"sup"`` (sup error over sup remainder) or
    ``"pointwise"`` (sup over x of error(x) / remainder(x)).
    """

    name: str
    predicted: object
    remainder_name: str
    remainder: object
    reading: str = "sup"

    def remainder_value(self) -> float:
        r = self.remainder
        return r.sup() if isinstance(r, GridFunction) else float(r)


def main1_pieces(ctx: DiracContext) -> dict:
    """Iterated integrals of the Cauchy asymptotics, in bounded form."""

    def build():
        G = cumint(ctx.s2 * ctx.grid.exp(ctx.lam))  # int_0^x e^{2 i mu t} sigma2
        It = fwd(ctx.s1 * G, ctx.lam)  # int_0^x e^{2 i mu (x-s)} sigma1(s) G(s)
        M = cumint(ctx.s2 * It)
        L = fwd(ctx.s1 * M, ctx.lam)
        H = cumint(ctx.s2 * ctx.f1)
        T3 = fwd(ctx.s2 * ctx.f1**2, ctx.lam)
        return {"G": G, "I": It, "M": M, "L": L, "H": H, "T3": T3}

    return ctx.memo("main1", build)


def quadruple_L(ctx, mu=None, x=None):
    """L(x, mu); the whole profile when ``x`` is None."""
    ctx = _ctx(ctx, mu)
    L = main1_pieces(ctx)["L"]
    return L if x is None else L(x)


def _tier_T_remainder(ctx):
    return ctx.gamma0(1) + ctx.gamma0(2) + (ctx.gamma(1) + ctx.gamma(2))


def approx_tier(ctx, tier: str, mu=None) -> ApproximantTier:
    """Predicted pair for one asymptotic tier and its declared remainder."""
    ctx = _ctx(ctx, mu)
    one, zero = ctx.e, ctx.e * 0.0
    K1, K2 = ctx.Ke(1), ctx.Ke(2)
    if tier == "w-R":
        pred = (one - K1, ctx.g2 - bwd(ctx.s2 * K1, ctx.lam))
        return ApproximantTier(tier, pred, "gamma_tilde", ctx.gamma_tilde)
    if tier == "w-S":
        return ApproximantTier(tier, (one - K1, ctx.g2), "Lambda", ctx.lam_profile, "pointwise")
    if tier == "w-T":
        return ApproximantTier(tier, (one, zero), "gamma_sum", _tier_T_remainder(ctx), "pointwise")
    if tier == "v-R":
        pred = (-ctx.f1 + fwd(ctx.s1 * K2, ctx.lam), one - K2)
        return ApproximantTier(tier, pred, "gamma_tilde", ctx.gamma_tilde)
    if tier == "v-S":
        return ApproximantTier(tier, (-ctx.f1, one - K2), "Lambda", ctx.lam_profile, "pointwise")
    if tier == "v-T":
        return ApproximantTier(tier, (zero, one), "gamma_sum", _tier_T_remainder(ctx), "pointwise")
    if tier == "main1-c":
        p = main1_pieces(ctx)
        pred = TwoExp((one, zero), (p["I"] + p["L"], -p["G"] - p["M"]), ctx.mu)
        return ApproximantTier(tier, pred, "gamma_tilde", ctx.gamma_tilde)
    if tier == "main1-s":
        p = main1_pieces(ctx)
        pred = (-ctx.f1 - ctx.f1 * p["H"] + p["T3"], one + p["H"])
        return ApproximantTier(tier, pred, "gamma_tilde", ctx.gamma_tilde)
    if tier == "corKsq":
        return ApproximantTier(tier, None, "gamma_tilde", ctx.gamma_tilde)
    raise ValueError(f"unknown tier {tier!r}")


def tier_error(tier: ApproximantTier, fs: FundamentalSet, ctx: DiracContext | None = None):
    """Measured error of a tier against the fundamental set.

    Returns ``(error, ratio)`` where ``error`` is the sup over x and both
    components, and ``ratio`` follows the tier's reading.
    """
    name = tier.name
    if name == "corKsq":
        err = max(ctx.K2e(1).sup(), ctx.K2e(2).sup())
        rem = tier.remainder_value()
        return err, err / rem if rem > 0 else (0.0 if err == 0 else float("inf"))
    if name == "main1-c":
        diff = TwoExp(
            tuple(a - b for a, b in zip(fs.c.A, tier.predicted.A)),
            tuple(a - b for a, b in zip(fs.c.B, tier.predicted.B)),
            fs.c.mu,
        )
        errs = [diff.normalized(k).abs() for k in (0, 1)]
    else:
        exact = {"w-": fs.w, "v-": fs.v}.get(name[:2], fs.s).pair()
        errs = [(a - b).abs() for a, b in zip(exact, tier.predicted)]
    pointwise = GridFunction(errs[0].grid, np.maximum(errs[0].values.real, errs[1].values.real))
    err = pointwise.sup()
    if tier.reading == "pointwise":
        rem = tier.remainder.values.real
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rem > 0, pointwise.values.real / rem, np.where(pointwise.values.real > 0, np.inf, 0.0))
        return err, float(np.max(r))
    rem = tier.remainder_value()
    return err, err / rem if rem > 0 else (0.0 if err == 0 else float("inf"))


def corksq_bound(ctx: DiracContext, j: int) -> float:
    """Explicit constant bound for sup |K_j^2 e| from its splitting."""
    v = ctx.point.v_of_r
    if j == 1:
        l1 = lp_norm(ctx.pot.sigma1, 1.0)
        w = (ctx.s1.abs() * ctx.gamma0(2) ** 2).integral().real
    else:
        l1 = lp_norm(ctx.pot.sigma2, 1.0)
        w = (ctx.s2.abs() * ctx.gamma0(1) ** 2).integral().real
    return float((v + 0.5) * l1 * w)

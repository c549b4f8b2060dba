"""Sweeps of the spectral parameter and the batch identity suite.

An "O(remainder) as |mu| -> infinity" claim is checked as boundedness of
``error / remainder`` over a geometric sequence of radii on a few rays.  A
(tier, ray) series is *bounded* when its largest ratio is at most ten times
the median of its first two ratios.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dirac import TIERS, DiracContext, approx_tier, cauchy_solutions, tier_error
from .exceptions import DiracAsymError
from .grid import make_grid
from .identities import EXACT_IDS, INEQUALITY_IDS, identity_eval
from .oracle import direct_profiles
from .potential import PerturbationMatrix, PiecewisePotential

PERTURBED_TIERS = ("pert-W", "pert-V")
BOUND_FACTOR = 10.0


def thread_count() -> int:
    cap = os.environ.get("DIRAC_ASYM_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


@dataclass
class SweepPlan:
    """Rays, radii and tiers of a sweep.

    The sampled points are ``mu = t exp(i theta) - i r / 2`` with
    ``t = t0 * 2**k``, ``k = 0..doublings``; the offset keeps every point
    strictly inside the half-plane ``Im mu > -r`` on rays with theta >= 0.
    """

    pot: PiecewisePotential
    rays: tuple = (0.0,)
    t0: float = 20.0
    doublings: int = 5
    r: float = 0.0
    tiers: tuple = TIERS
    P: PerturbationMatrix | None = None
    density: float = 1.0
    tol: float = 1e-13
    oracle_check: bool = False
    seed: int | None = None
    auto_raise: bool = True

    def __post_init__(self):
        self.rays = tuple(float(t) for t in self.rays)
        self.tiers = tuple(self.tiers)
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if self.t0 <= 0 or self.doublings < 0:
            raise ValueError("t0 must be positive and doublings nonnegative")
        for t in self.tiers:
            if t not in TIERS and t not in PERTURBED_TIERS:
                raise ValueError(f"unknown tier {t!r}")
            if t in PERTURBED_TIERS and self.P is None:
                raise ValueError(f"tier {t} needs a perturbation matrix")
        for th in self.rays:
            for t in self.radii:
                im = self.mu(th, t).imag
                if im < -self.r - 1e-12 or (self.r > 0 and im <= -self.r):
                    raise ValueError(f"ray {th} leaves the half-plane Im mu > -r")

    @property
    def radii(self):
        return tuple(self.t0 * 2.0**k for k in range(self.doublings + 1))

    def mu(self, theta, t):
        return complex(t * np.exp(1j * theta) - 0.5j * self.r)

    def points(self):
        """(theta, t) in radius-then-ray order."""
        return [(th, t) for t in self.radii for th in self.rays]


ROW_FIELDS = ("ray", "radius", "mu_re", "mu_im", "tier", "sup_error", "remainder", "ratio", "skipped", "method")


@dataclass
class SweepRow:
    ray: float
    radius: float
    mu_re: float
    mu_im: float
    tier: str
    sup_error: float
    remainder: float
    ratio: float
    skipped: bool
    method: str

    def as_tuple(self):
        return tuple(getattr(self, f) for f in ROW_FIELDS)


def series_verdict(ratios) -> str:
    """bounded / growing / inconclusive for one ordered series of ratios."""
    ratios = [float(x) for x in ratios]
    if len(ratios) < 2:
        return "inconclusive"
    ref = BOUND_FACTOR * float(np.median(ratios[:2]))
    if not np.all(np.isfinite(ratios)):
        return "growing"
    return "bounded" if max(ratios) <= ref else "growing"


@dataclass
class VerdictTable:
    rows: list
    info: dict = field(default_factory=dict)

    def series(self):
        """(tier, ray) -> rows sorted by radius."""
        out = {}
        for row in self.rows:
            out.setdefault((row.tier, row.ray), []).append(row)
        for v in out.values():
            v.sort(key=lambda r: r.radius)
        return out

    def verdicts(self) -> dict:
        return {k: series_verdict([r.ratio for r in v if not r.skipped]) for k, v in self.series().items()}

    def verdict_of(self, tier, ray=None):
        vs = [v for (t, th), v in self.verdicts().items() if t == tier and (ray is None or th == ray)]
        if not vs:
            return "inconclusive"
        if "growing" in vs:
            return "growing"
        return "bounded" if all(v == "bounded" for v in vs) else "inconclusive"

    def all_bounded(self) -> bool:
        return all(v == "bounded" for v in self.verdicts().values())

    def records(self):
        """Rows as tuples with the verdict of their series appended."""
        ver = self.verdicts()
        return [row.as_tuple() + (ver[(row.tier, row.ray)],) for row in self.rows]

    @classmethod
    def from_records(cls, records, info=None):
        rows = []
        for rec in records:
            vals = dict(zip(ROW_FIELDS, rec))
            rows.append(
                SweepRow(
                    float(vals["ray"]),
                    float(vals["radius"]),
                    float(vals["mu_re"]),
                    float(vals["mu_im"]),
                    str(vals["tier"]),
                    float(vals["sup_error"]),
                    float(vals["remainder"]),
                    float(vals["ratio"]),
                    vals["skipped"] in (True, "True", "true", 1),
                    str(vals["method"]),
                )
            )
        return cls(rows, dict(info or {}))

    def __eq__(self, other):
        if not isinstance(other, VerdictTable):
            return NotImplemented
        return self.records() == other.records()


def _point(plan: SweepPlan, theta: float, t: float):
    mu = plan.mu(theta, t)
    if plan.P is not None and any(x in PERTURBED_TIERS for x in plan.tiers):
        mesh = np.union1d(plan.pot.mesh, plan.P.mesh)
    else:
        mesh = plan.pot.mesh
    grid = make_grid(mesh, mu, plan.density)
    ctx = DiracContext(plan.pot, mu, grid, r=plan.r)
    fs = cauchy_solutions(ctx, tol=plan.tol, fallback=True)
    skipped = fs.info["w"] != "neumann" or fs.info["v"] != "neumann"
    method = "neumann" if not skipped else "direct"
    if plan.oracle_check and not skipped:
        W, V = direct_profiles(plan.pot, mu, grid)
        diff = max(
            max((a - b).sup() for a, b in zip(fs.w.pair(), W)),
            max((a - b).sup() for a, b in zip(fs.v.pair(), V)),
        )
        method = f"neumann(oracle_diff={diff:.3e})"
    rows = []
    psys = None
    for name in plan.tiers:
        if name in PERTURBED_TIERS:
            from .perturbed import PerturbedSystem, approx_first_order, profile_error, solve_perturbed

            if psys is None:
                psys = PerturbedSystem(plan.pot, plan.P, mu, ctx, fs)
            which = name[-1]
            try:
                res = solve_perturbed(psys, which, plan.tol)
            except DiracAsymError:
                rows.append(SweepRow(theta, t, mu.real, mu.imag, name, np.nan, np.nan, np.nan, True, method))
                continue
            tier = approx_first_order(psys, which)
            err = profile_error(tier.predicted, res.Z)
            rem = tier.remainder_value()
            ratio = err / rem if rem > 0 else (0.0 if err == 0 else np.inf)
        else:
            tier = approx_tier(ctx, name)
            err, ratio = tier_error(tier, fs, ctx)
            rem = tier.remainder_value()
        rows.append(SweepRow(theta, t, mu.real, mu.imag, name, float(err), float(rem), float(ratio), skipped, method))
    return rows


MAX_RAISE = 12


def gate_holds(plan: SweepPlan, t: float) -> bool:
    """Whether the Neumann gate holds for both j at radius t on every ray."""
    for th in plan.rays:
        ctx = DiracContext(plan.pot, plan.mu(th, t), r=plan.r)
        if max(ctx.point.a_const * ctx.gamma(1), ctx.point.a_const * ctx.gamma(2)) > 0.5:
            return False
    return True


def effective_t0(plan: SweepPlan) -> float:
    """Smallest t0 * 2**m (m <= MAX_RAISE) at which the gate holds on all rays."""
    t = plan.t0
    for _ in range(MAX_RAISE):
        if gate_holds(plan, t):
            return t
        t *= 2.0
    return t


def run_sweep(plan: SweepPlan, threads: int | None = None) -> VerdictTable:
    """Evaluate every tier at every point of the plan.

    With ``plan.auto_raise`` the starting radius is doubled until the
    Neumann gate holds at the first radius (the number of radii is kept).
    Points whose gate still fails are computed with the direct solver,
    flagged ``skipped`` and left out of the verdicts.
    """
    requested = plan.t0
    if plan.auto_raise:
        t0 = effective_t0(plan)
        if t0 != plan.t0:
            plan = replace(plan, t0=t0)
    pts = plan.points()
    n = threads or thread_count()
    if n > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            chunks = list(ex.map(lambda p: _point(plan, *p), pts))
    else:
        chunks = [_point(plan, *p) for p in pts]
    rows = [row for chunk in chunks for row in chunk]
    unskipped = [t for t in plan.radii if all(not r.skipped for r in rows if r.radius == t)]
    info = {
        "t0_requested": requested,
        "t0": plan.t0,
        "first_unskipped": min(unskipped) if unskipped else None,
        "n_points": len(pts),
    }
    return VerdictTable(rows, info)


# ---------------------------------------------------------- identities ---

IDENTITY_FIELDS = ("potential", "mu_re", "mu_im", "x", "name", "lhs_abs", "rhs_abs", "residual", "exact", "passed")


@dataclass
class IdentityReport:
    rows: list
    tol: float

    def passed(self) -> bool:
        return all(r[-1] for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r[-1]]

    def worst(self, name):
        vals = [r[7] for r in self.rows if r[4] == name]
        return max(vals) if vals else None


def run_identity_suite(pots, mu_samples, x_samples=(0.0, 0.3, 0.7, 1.0), tol=1e-8, d: float = 1.0, r=None) -> IdentityReport:
    """Exact identities at every x sample, inequalities once per (potential, mu).

    ``int4`` is evaluated only for ``|Im mu| <= d``.  Exact identities pass
    when the relative residual is at most ``tol``; inequalities when the
    slack ``lhs - rhs`` is nonpositive up to round-off.
    """
    if isinstance(pots, PiecewisePotential):
        pots = [pots]
    rows = []
    for k, pot in enumerate(pots):
        for mu in mu_samples:
            mu = complex(mu)
            ctx = DiracContext(pot, mu, r=r)
            for name in EXACT_IDS:
                for x in x_samples:
                    res = identity_eval(name, ctx, x=x)
                    rows.append((k, mu.real, mu.imag, float(x), name, abs(res.lhs), abs(res.rhs), res.residual, True, res.passed(tol)))
            for name in INEQUALITY_IDS:
                if name == "int4" and abs(mu.imag) > d:
                    continue
                res = identity_eval(name, ctx, d=d if name == "int4" else None)
                rows.append((k, mu.real, mu.imag, float("nan"), name, abs(res.lhs), abs(res.rhs), res.residual, False, res.passed()))
    return IdentityReport(rows, tol)


__all__ = [
    "SweepPlan",
    "SweepRow",
    "VerdictTable",
    "IdentityReport",
    "run_sweep",
    "run_identity_suite",
    "series_verdict",
    "thread_count",
]

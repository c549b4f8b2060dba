"""Command line front end: ``dirac-asym {solve,sweep,verify,perturbed,sl}``.

Exit status: 0 on success, 1 when a sweep is not bounded everywhere or an
identity fails, 2 on configuration errors, 3 when the Neumann gate (or
the perturbed contraction) fails and no fallback was allowed.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractionFailure, DiracAsymError, GateViolation
from .io import write_table
from .potential import (
    PiecewisePotential,
    PotentialError,
    load_potential,
    random_piecewise_constant,
    random_piecewise_linear,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_GATE = 0, 1, 2, 3
EXIT_PIPE = 141  # reader closed stdout (128 + SIGPIPE)
SUBCOMMANDS = ("solve", "sweep", "verify", "perturbed", "sl")
MAX_TOL = 1e-2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    potential: str | None = None
    mu: complex | None = None
    mus: list = field(default_factory=list)
    r: float | None = None
    rays: tuple = (0.0,)
    t0: float = 20.0
    doublings: int = 5
    tiers: tuple | None = None
    tol: float = 1e-10
    oracle_tol: float = 1e-12
    fmt: str = "csv"
    out: str | None = None
    seed: int | None = None
    raw: bool = False
    fallback: bool = True
    density: float = 1.0
    count: int = 1
    auto_raise: bool = True

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        for name in ("tol", "oracle_tol"):
            v = getattr(self, name)
            if not 0.0 < v <= MAX_TOL:
                raise ConfigError(f"{name}={v} outside (0, {MAX_TOL}]")
        if self.fmt not in ("csv", "jsonl"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.r is not None and self.r < 0:
            raise ConfigError("r must be nonnegative")
        if self.subcommand in ("solve", "perturbed", "sl") and self.mu is None:
            raise ConfigError(f"{self.subcommand} needs --mu")


def _parser():
    p = argparse.ArgumentParser(prog="dirac-asym", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--potential", help="potential definition file (JSON)")
        s.add_argument("--mu", nargs=2, type=float, action="append", metavar=("RE", "IM"))
        s.add_argument("--r", type=float, default=None, help="half-plane offset")
        s.add_argument("--rays", default="0", help="comma separated ray angles")
        s.add_argument("--t0", type=float, default=20.0)
        s.add_argument("--doublings", type=int, default=5)
        s.add_argument("--tiers", default=None, help="comma separated tier names")
        s.add_argument("--tol", type=float, default=1e-10, help="Neumann / fixed-point tolerance")
        s.add_argument("--oracle-tol", type=float, default=1e-12)
        s.add_argument("--format", dest="fmt", default="csv", choices=("csv", "jsonl"))
        s.add_argument("--out", default=None, help="output path (default stdout)")
        s.add_argument("--seed", type=int, default=None, help="seed for a random potential")
        s.add_argument("--raw", action="store_true", help="multiply exponential prefactors back in")
        s.add_argument("--no-fallback", action="store_true", help="fail instead of using the direct solver")
        s.add_argument("--density", type=float, default=1.0, help="grid density multiplier")
        s.add_argument("--count", type=int, default=1, help="number of random potentials (verify)")
        s.add_argument("--no-auto-raise", action="store_true", help="sweep: keep t0 even if the gate fails there")
    return p


def _angle(tok):
    tok = tok.strip().lower().replace(" ", "")
    if "pi" in tok:
        num, _, den = tok.partition("/")
        k = num.replace("pi", "").replace("*", "") or "1"
        k = -1.0 if k == "-" else float(k)
        return k * np.pi / (float(den) if den else 1.0)
    return float(tok)


def config_from_args(ns) -> RunConfig:
    mus = [complex(a, b) for a, b in (ns.mu or [])]
    try:
        rays = tuple(_angle(t) for t in ns.rays.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --rays {ns.rays!r}") from exc
    tiers = tuple(t.strip() for t in ns.tiers.split(",") if t.strip()) if ns.tiers else None
    return RunConfig(
        ns.subcommand,
        ns.potential,
        mus[0] if mus else None,
        mus,
        ns.r,
        rays,
        ns.t0,
        ns.doublings,
        tiers,
        ns.tol,
        ns.oracle_tol,
        ns.fmt,
        ns.out,
        ns.seed,
        ns.raw,
        not ns.no_fallback,
        ns.density,
        ns.count,
        not ns.no_auto_raise,
    )


def _load(cfg: RunConfig, generator=random_piecewise_linear):
    if cfg.potential:
        return load_potential(cfg.potential)
    if cfg.seed is not None:
        return generator(np.random.default_rng(cfg.seed)), None
    return PiecewisePotential.zero(), None


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", encoding="utf-8", newline="") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        else:
            self.fh.flush()


def _nodes(grid):
    """Flat node indices with the duplicated subcell endpoints removed."""
    x = grid.nodes.ravel()
    keep = np.ones(x.size, dtype=bool)
    keep[grid.n :: grid.n] = False
    return x[keep], keep


def _clamp(v, name, warned):
    v = np.asarray(v, dtype=complex)
    bad = ~np.isfinite(v)
    if np.any(bad):
        if not warned:
            warnings.warn(f"overflow in raw output ({name}); clamped to +-inf", RuntimeWarning, stacklevel=2)
            warned.add(name)
        re = np.where(np.isfinite(v.real), v.real, np.copysign(np.inf, np.nan_to_num(v.real, nan=1.0)))
        im = np.where(np.isfinite(v.imag), v.imag, np.copysign(np.inf, np.nan_to_num(v.imag, nan=1.0)))
        return re, im
    return v.real, v.imag


def _complex_columns(names):
    return [f"{n}_{part}" for n in names for part in ("re", "im")]


def _rows(x, series, raw_factors=None):
    warned = set()
    cols = []
    for name, v in series:
        if raw_factors is not None and name in raw_factors:
            with np.errstate(over="ignore", invalid="ignore"):
                v = v * raw_factors[name]
        re, im = _clamp(v, name, warned)
        cols += [re, im]
    return [(float(xx),) + tuple(float(c[i]) for c in cols) for i, xx in enumerate(x)]


def cmd_solve(cfg: RunConfig) -> int:
    from .dirac import DiracContext, cauchy_solutions

    pot, _ = _load(cfg)
    ctx = DiracContext(pot, cfg.mu, r=cfg.r, density=cfg.density)
    fs = cauchy_solutions(ctx, tol=cfg.tol, fallback=cfg.fallback)
    g = ctx.grid
    x, keep = _nodes(g)
    flat = lambda gf: gf.values.ravel()[keep]
    mu = ctx.mu
    c1, c2 = fs.c.normalized(0), fs.c.normalized(1)
    series = [
        ("z1", flat(fs.w.first)),
        ("z2", flat(fs.v.second)),
        ("w1", flat(fs.w.first)),
        ("w2", flat(fs.w.second)),
        ("v1", flat(fs.v.first)),
        ("v2", flat(fs.v.second)),
        ("c1", flat(c1)),
        ("c2", flat(c2)),
        ("s1", flat(fs.s.first)),
        ("s2", flat(fs.s.second)),
        ("gamma01", flat(ctx.gamma0(1))),
        ("gamma02", flat(ctx.gamma0(2))),
    ]
    factors = None
    if cfg.raw:
        with np.errstate(over="ignore", invalid="ignore"):
            fw = np.exp(1j * mu * x)
            fv = np.exp(1j * mu * (1.0 - x))
            fs_ = np.exp(-1j * mu * x)
            fc = np.abs(fw) + np.abs(np.exp(-1j * mu * x))
        factors = {"w1": fw, "w2": fw, "v1": fv, "v2": fv, "s1": fs_, "s2": fs_, "c1": fc, "c2": fc}
    names = [n for n, _ in series]
    columns = ["x"] + _complex_columns(names)
    meta = {"mu": f"{mu.real!r},{mu.imag!r}", "w_method": fs.w.method, "v_method": fs.v.method, "raw": cfg.raw}
    with _Output(cfg.out) as fh:
        write_table(fh, columns, _rows(x, series, factors), cfg.fmt, meta)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    from .dirac import TIERS
    from .verify import ROW_FIELDS, SweepPlan, VerdictTable, run_sweep

    pot, P = _load(cfg)
    plan = SweepPlan(
        pot,
        rays=cfg.rays,
        t0=cfg.t0,
        doublings=cfg.doublings,
        r=cfg.r or 0.0,
        tiers=cfg.tiers or TIERS,
        P=P,
        density=cfg.density,
        tol=cfg.tol,
        seed=cfg.seed,
        auto_raise=cfg.auto_raise,
    )
    table: VerdictTable = run_sweep(plan)
    meta = dict(table.info)
    with _Output(cfg.out) as fh:
        write_table(fh, list(ROW_FIELDS) + ["verdict"], table.records(), cfg.fmt, meta)
    return EXIT_OK if table.all_bounded() else EXIT_FAIL


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import IDENTITY_FIELDS, run_identity_suite

    if cfg.potential:
        pots = [load_potential(cfg.potential)[0]]
    elif cfg.seed is not None:
        rng = np.random.default_rng(cfg.seed)
        pots = [random_piecewise_constant(rng) for _ in range(max(1, cfg.count))]
    else:
        pots = [PiecewisePotential.zero()]
    mus = cfg.mus or [3.0, 5.0 + 2.0j, 10.0 - 0.5j]
    report = run_identity_suite(pots, mus, r=cfg.r)
    with _Output(cfg.out) as fh:
        write_table(fh, list(IDENTITY_FIELDS), report.rows, cfg.fmt, {"tol": report.tol})
    return EXIT_OK if report.passed() else EXIT_FAIL


def _profile_rows(grid, named, factors=None):
    x, keep = _nodes(grid)
    series = [(n, gf.values.ravel()[keep]) for n, gf in named]
    return x, _rows(x, series, factors)


def cmd_perturbed(cfg: RunConfig) -> int:
    from .perturbed import approx_first_order, perturbed_system, profile_error, solve_perturbed

    pot, P = _load(cfg)
    if P is None:
        raise ConfigError("perturbed needs a potential file with a 'P' entry")
    system = perturbed_system(pot, P, cfg.mu, cfg.density, r=cfg.r)
    rw = solve_perturbed(system, "W", cfg.tol)
    rv = solve_perturbed(system, "V", cfg.tol)
    meta = {"iterations_W": rw.iterations, "iterations_V": rv.iterations}
    for res in (rw, rv):
        tier = approx_first_order(system, res.kind)
        err = profile_error(tier.predicted, res.Z)
        meta[f"{tier.name}_error"] = repr(err)
        meta[f"{tier.name}_ratio"] = repr(err / tier.remainder_value() if tier.remainder_value() > 0 else 0.0)
    named = [("Wt1", rw.Z[0]), ("Wt2", rw.Z[1]), ("Vt1", rv.Z[0]), ("Vt2", rv.Z[1])]
    factors = None
    x, _ = _nodes(system.grid)
    if cfg.raw:
        with np.errstate(over="ignore", invalid="ignore"):
            fw, fv = np.exp(1j * system.mu * x), np.exp(1j * system.mu * (1.0 - x))
        factors = {"Wt1": fw, "Wt2": fw, "Vt1": fv, "Vt2": fv}
    x, rows = _profile_rows(system.grid, named, factors)
    with _Output(cfg.out) as fh:
        write_table(fh, ["x"] + _complex_columns([n for n, _ in named]), rows, cfg.fmt, meta)
    return EXIT_OK


def cmd_sl(cfg: RunConfig) -> int:
    from .perturbed import profile_error, quasi_residual, sl_fundamental, sl_prediction
    from .oscquad import rho_remainder

    pot, _ = _load(cfg)
    sigma = pot.sigma1
    res = sl_fundamental(sigma, cfg.mu, cfg.density, cfg.tol)
    system = res.system
    sg = system.grid.sample(sigma)
    pred1, pred2 = sl_prediction(system)
    rho = rho_remainder(system.pot, system.P, system.mu, system.grid)
    err = max((pred1 - res.y1.y).sup(), (pred2 - res.y2.y).sup())
    meta = {
        "iterations_W": res.iterations[0],
        "iterations_V": res.iterations[1],
        "tau_l1": repr(system.tau_l1),
        "SL_error": repr(err),
        "SL_ratio": repr(err / rho if rho > 0 else 0.0),
        "plugback_y1": repr(quasi_residual(res.y1, sg)[0]),
        "plugback_y2": repr(quasi_residual(res.y2, sg)[0]),
    }
    named = [("y1", res.y1.y), ("y1q", res.y1.y_quasi), ("y2", res.y2.y), ("y2q", res.y2.y_quasi)]
    factors = None
    if cfg.raw:
        x, _ = _nodes(system.grid)
        with np.errstate(over="ignore", invalid="ignore"):
            fw, fv = np.exp(1j * system.mu * x), np.exp(1j * system.mu * (1.0 - x))
        factors = {"y1": fw, "y1q": fw, "y2": fv, "y2q": fv}
    _, rows = _profile_rows(system.grid, named, factors)
    with _Output(cfg.out) as fh:
        write_table(fh, ["x"] + _complex_columns([n for n, _ in named]), rows, cfg.fmt, meta)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "perturbed": cmd_perturbed, "sl": cmd_sl}


def run(cfg: RunConfig) -> int:
    from . import oracle

    oracle.RTOL = cfg.oracle_tol
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except BrokenPipeError:
        # keep the interpreter from complaining again while flushing at exit
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_PIPE
    except (GateViolation, ContractionFailure) as exc:
        print(f"dirac-asym: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (ConfigError, PotentialError) as exc:
        print(f"dirac-asym: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"dirac-asym: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DiracAsymError as exc:
        print(f"dirac-asym: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        print(f"dirac-asym: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

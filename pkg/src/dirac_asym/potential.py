"""Piecewise-polynomial coefficients of the Dirac system.

Coefficients are stored per mesh cell as complex monomial coefficients in the
global variable ``t`` (low to high degree), so cell ``i`` carries
``sum_k c[i, k] * t**k`` on ``[mesh[i], mesh[i+1])``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre as _leg

D_MAX = 3
MIN_GAP = 1e-12
_NORM_NODES = 64

_gl_x, _gl_w = _leg.leggauss(_NORM_NODES)
_GL_U = 0.5 * (_gl_x + 1.0)
_GL_W = 0.5 * _gl_w


class PotentialError(ValueError):
    """Raised for malformed potentials or potential files."""


def _check_mesh(mesh):
    mesh = np.asarray(mesh, dtype=float)
    if mesh.ndim != 1 or len(mesh) < 2:
        raise PotentialError("mesh needs at least two breakpoints")
    if abs(mesh[0]) > 0 or abs(mesh[-1] - 1.0) > 0:
        raise PotentialError("mesh must start at 0 and end at 1")
    if np.any(np.diff(mesh) < MIN_GAP):
        raise PotentialError("mesh must be strictly increasing with gaps >= 1e-12")
    return mesh


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Complex piecewise polynomial on a mesh of [0, 1]."""

    mesh: np.ndarray
    coeffs: np.ndarray  # (M, deg + 1)

    def __post_init__(self):
        mesh = _check_mesh(self.mesh)
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if c.shape[0] != len(mesh) - 1:
            raise PotentialError("one coefficient row per cell expected")
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "coeffs", c)
        mesh.flags.writeable = False
        c.flags.writeable = False

    @classmethod
    def constant(cls, value, mesh=(0.0, 1.0)):
        mesh = np.asarray(mesh, dtype=float)
        return cls(mesh, np.full((len(mesh) - 1, 1), value, dtype=complex))

    @classmethod
    def zero(cls, mesh=(0.0, 1.0)):
        return cls.constant(0.0, mesh)

    @property
    def n_cells(self):
        return len(self.mesh) - 1

    @property
    def degree(self):
        return self.coeffs.shape[1] - 1

    def cell_index(self, x):
        """Cell containing ``x``; right-continuous, with x = 1 in the last cell."""
        idx = np.searchsorted(self.mesh, x, side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def eval_cell(self, cell, t):
        """Evaluate the polynomial of ``cell`` (scalar or array) at ``t``."""
        c = self.coeffs[cell]
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast(t, c[..., 0]).shape, dtype=complex)
        for k in range(self.coeffs.shape[1] - 1, -1, -1):
            out = out * t + c[..., k]
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.eval_cell(self.cell_index(x), x)

    def scaled(self, factor):
        return PiecewisePoly(self.mesh, self.coeffs * factor)

    def is_zero(self):
        return not np.any(self.coeffs)

    def refined(self, new_mesh):
        """Same function on a finer mesh containing the old breakpoints."""
        new_mesh = _check_mesh(new_mesh)
        if not np.all(np.isin(self.mesh, new_mesh)):
            raise PotentialError("refined mesh must contain the original breakpoints")
        mids = 0.5 * (new_mesh[:-1] + new_mesh[1:])
        return PiecewisePoly(new_mesh, self.coeffs[self.cell_index(mids)])

    def gauss_samples(self):
        """Values and weights of the per-cell 64-point Gauss rule."""
        a, b = self.mesh[:-1], self.mesh[1:]
        t = a[:, None] + (b - a)[:, None] * _GL_U[None, :]
        w = (b - a)[:, None] * _GL_W[None, :]
        vals = self.eval_cell(np.arange(self.n_cells)[:, None], t)
        return t, w, vals

    def to_json(self):
        return [[[z.real, z.imag] for z in row] for row in self.coeffs]


def lp_norm(f: PiecewisePoly, p: float) -> float:
    """L^p norm on [0, 1] of a piecewise polynomial, ``p`` in [1, inf]."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    _, w, vals = f.gauss_samples()
    mag = np.abs(vals)
    if np.isinf(p):
        t = np.linspace(0.0, 1.0, 65)
        a, b = f.mesh[:-1, None], f.mesh[1:, None]
        dense = np.abs(f.eval_cell(np.arange(f.n_cells)[:, None], a + (b - a) * t))
        return float(max(mag.max(), dense.max()))
    return float(np.sum(w * mag**p) ** (1.0 / p))


def perturbation_norm_samples(P: "PerturbationMatrix", t):
    """Spectral norm of the 2x2 matrix P(t) at the points ``t``."""
    m = np.stack([np.stack([P.p11(t), P.p12(t)], -1), np.stack([P.p21(t), P.p22(t)], -1)], -2)
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


@dataclass(frozen=True, eq=False)
class PiecewisePotential:
    """The pair (sigma1, sigma2) with its Lebesgue exponent."""

    sigma1: PiecewisePoly
    sigma2: PiecewisePoly
    p_exponent: float = 1.0
    d_max: int = D_MAX
    allow_p2: bool = False

    def __post_init__(self):
        if not np.array_equal(self.sigma1.mesh, self.sigma2.mesh):
            # bring both onto the common refinement
            mesh = np.union1d(self.sigma1.mesh, self.sigma2.mesh)
            object.__setattr__(self, "sigma1", self.sigma1.refined(mesh))
            object.__setattr__(self, "sigma2", self.sigma2.refined(mesh))
        hi = 2.0 if self.allow_p2 else 2.0 - 1e-12
        if not 1.0 <= self.p_exponent <= hi:
            raise PotentialError(f"p_exponent {self.p_exponent} outside [1, 2)")
        for s in (self.sigma1, self.sigma2):
            if s.degree > self.d_max:
                raise PotentialError(f"degree {s.degree} exceeds d_max={self.d_max}")

    @classmethod
    def constant(cls, s1, s2, p_exponent=1.0, mesh=(0.0, 1.0)):
        return cls(PiecewisePoly.constant(s1, mesh), PiecewisePoly.constant(s2, mesh), p_exponent)

    @classmethod
    def zero(cls):
        return cls.constant(0.0, 0.0)

    @property
    def mesh(self):
        return self.sigma1.mesh

    @property
    def n_cells(self):
        return self.sigma1.n_cells

    @property
    def q_exponent(self):
        """Hölder conjugate of ``p_exponent``."""
        p = self.p_exponent
        return np.inf if p == 1.0 else p / (p - 1.0)

    def is_zero(self):
        return self.sigma1.is_zero() and self.sigma2.is_zero()

    def swapped(self):
        return PiecewisePotential(self.sigma2, self.sigma1, self.p_exponent, self.d_max, self.allow_p2)

    def envelope_samples(self):
        """Gauss nodes, weights and values of sigma = max(|sigma1|, |sigma2|)."""
        t, w, v1 = self.sigma1.gauss_samples()
        _, _, v2 = self.sigma2.gauss_samples()
        return t, w, np.maximum(np.abs(v1), np.abs(v2))

    def envelope(self, x):
        return np.maximum(np.abs(self.sigma1(x)), np.abs(self.sigma2(x)))


def sigma_max_norm(pot: PiecewisePotential, p: float) -> float:
    """L^p norm of the pointwise envelope max(|sigma1|, |sigma2|)."""
    _, w, env = pot.envelope_samples()
    if np.isinf(p):
        return float(max(env.max(), lp_norm(pot.sigma1, np.inf), lp_norm(pot.sigma2, np.inf)))
    return float(np.sum(w * env**p) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class PerturbationMatrix:
    """Entries p11, p12, p21, p22 of the 1/mu perturbation, on one mesh."""

    p11: PiecewisePoly
    p12: PiecewisePoly
    p21: PiecewisePoly
    p22: PiecewisePoly

    def __post_init__(self):
        m = self.p11.mesh
        for e in (self.p12, self.p21, self.p22):
            if not np.array_equal(e.mesh, m):
                raise PotentialError("perturbation entries must share a mesh")

    @classmethod
    def zero(cls, mesh=(0.0, 1.0)):
        z = PiecewisePoly.zero(mesh)
        return cls(z, z, z, z)

    @property
    def mesh(self):
        return self.p11.mesh

    def entries(self):
        return self.p11, self.p12, self.p21, self.p22

    def is_zero(self):
        return all(e.is_zero() for e in self.entries())

    def refined(self, mesh):
        return PerturbationMatrix(*(e.refined(mesh) for e in self.entries()))

    def norm(self, t):
        return perturbation_norm_samples(self, t)



# ---------------------------------------------------------------- files ---

def _parse_poly(mesh, cells, name):
    try:
        rows = [[complex(float(c[0]), float(c[1])) for c in row] for row in cells]
    except (TypeError, ValueError, IndexError) as exc:
        raise PotentialError(f"{name}: coefficients must be [re, im] pairs") from exc
    if len(rows) != len(mesh) - 1:
        raise PotentialError(f"{name}: expected {len(mesh) - 1} cells, got {len(rows)}")
    deg = max(len(r) for r in rows)
    if deg == 0:
        raise PotentialError(f"{name}: empty coefficient rows")
    arr = np.zeros((len(rows), deg), dtype=complex)
    for i, r in enumerate(rows):
        arr[i, : len(r)] = r
    return PiecewisePoly(mesh, arr)


def parse_potential(data: dict):
    """Build ``(PiecewisePotential, PerturbationMatrix or None)`` from a mapping."""
    if "mesh" not in data:
        raise PotentialError("missing key 'mesh'")
    mesh = np.asarray(data["mesh"], dtype=float)
    if mesh.ndim != 1 or np.any(np.diff(mesh) <= 0):
        raise PotentialError("mesh must be a strictly increasing array")
    mesh = _check_mesh(mesh)
    s1 = _parse_poly(mesh, data.get("sigma1", [[[0, 0]]] * (len(mesh) - 1)), "sigma1")
    s2 = _parse_poly(mesh, data.get("sigma2", [[[0, 0]]] * (len(mesh) - 1)), "sigma2")
    p = float(data.get("p", 1.0))
    pot = PiecewisePotential(s1, s2, p, allow_p2=bool(data.get("allow_p2", p == 2.0)))
    P = None
    if "P" in data:
        raw = data["P"]
        if isinstance(raw, dict):
            raw = [raw[k] for k in ("p11", "p12", "p21", "p22")]
        if len(raw) != 4:
            raise PotentialError("P needs four entry arrays")
        P = PerturbationMatrix(*(_parse_poly(mesh, e, f"P[{i}]") for i, e in enumerate(raw)))
    return pot, P


def load_potential(path):
    """Read a potential definition file (JSON)."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise PotentialError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PotentialError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise PotentialError(f"{path}: top level must be an object")
    return parse_potential(data)


def dump_potential(pot: PiecewisePotential, P: PerturbationMatrix | None = None) -> dict:
    out = {
        "mesh": pot.mesh.tolist(),
        "sigma1": pot.sigma1.to_json(),
        "sigma2": pot.sigma2.to_json(),
        "p": pot.p_exponent,
    }
    if P is not None:
        out["P"] = {k: e.to_json() for k, e in zip(("p11", "p12", "p21", "p22"), P.entries())}
    return out


def save_potential(path, pot, P=None):
    Path(path).write_text(json.dumps(dump_potential(pot, P), indent=1))


# ------------------------------------------------------------ generators ---

def random_mesh(rng, n_cells):
    inner = np.sort(rng.uniform(0.05, 0.95, n_cells - 1))
    mesh = np.concatenate(([0.0], inner, [1.0]))
    while np.any(np.diff(mesh) < 1e-3):
        inner = np.sort(rng.uniform(0.05, 0.95, n_cells - 1))
        mesh = np.concatenate(([0.0], inner, [1.0]))
    return mesh


def random_piecewise_constant(rng, n_cells=6, l1_max=1.0, p_exponent=1.0):
    """Random complex piecewise-constant potential with envelope L1 norm <= l1_max."""
    mesh = random_mesh(rng, n_cells)
    c = rng.normal(size=(2, n_cells)) + 1j * rng.normal(size=(2, n_cells))
    pot = PiecewisePotential(
        PiecewisePoly(mesh, c[0][:, None]), PiecewisePoly(mesh, c[1][:, None]), p_exponent
    )
    scale = l1_max / max(sigma_max_norm(pot, 1.0), 1e-300)
    return PiecewisePotential(pot.sigma1.scaled(scale), pot.sigma2.scaled(scale), p_exponent)


def random_piecewise_linear(rng, n_cells=5, l1_max=1.0, p_exponent=1.0):
    """Random continuous piecewise-linear potential (hat-function combination)."""
    mesh = random_mesh(rng, n_cells)
    polys = []
    for _ in range(2):
        nodal = rng.normal(size=n_cells + 1) + 1j * rng.normal(size=n_cells + 1)
        a, b = mesh[:-1], mesh[1:]
        slope = (nodal[1:] - nodal[:-1]) / (b - a)
        polys.append(PiecewisePoly(mesh, np.stack([nodal[:-1] - slope * a, slope], -1)))
    pot = PiecewisePotential(polys[0], polys[1], p_exponent)
    scale = l1_max / max(sigma_max_norm(pot, 1.0), 1e-300)
    return PiecewisePotential(pot.sigma1.scaled(scale), pot.sigma2.scaled(scale), p_exponent)


def interpolate_cubic(func, n_cells):
    """Continuous piecewise-cubic interpolant of ``func`` on a uniform mesh."""
    mesh = np.linspace(0.0, 1.0, n_cells + 1)
    rows = []
    for a, b in zip(mesh[:-1], mesh[1:]):
        t = np.linspace(a, b, 4)
        rows.append(np.polynomial.polynomial.polyfit(t, np.asarray(func(t), dtype=complex), 3))
    return PiecewisePoly(mesh, np.array(rows))

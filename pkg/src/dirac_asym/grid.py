"""Composite Gauss-Lobatto grids and running integrals on them.

A :class:`Grid` splits every potential cell into equal subcells fine enough
that ``|mu| * h <= 1 / density``; each subcell carries ``n`` Lobatto nodes.
Functions live as nodal values per subcell, so a function may jump across
subcell edges (products with discontinuous coefficients).

The workhorse is :func:`running`, which evaluates

    forward:   F(x) = int_0^x exp(lam (x - t)) f(t) dt
    backward:  G(x) = int_x^1 exp(lam (t - x)) f(t) dt

at every node.  Each subcell contributes an exactly weighted local integral
(Gauss rule against the exponential, which is tame because ``|lam| h`` is
bounded); the subcell-to-subcell carry is the compiled kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from numpy.polynomial import legendre as _leg

from . import kernels

N_NODES = 12
MIN_SUBCELLS = 16
_N_GAUSS = 24


@lru_cache(maxsize=None)
def lobatto(n: int):
    """Gauss-Lobatto nodes and weights mapped to [0, 1]."""
    pn1 = _leg.Legendre.basis(n - 1)
    inner = np.sort(np.real(pn1.deriv().roots()))
    x = np.concatenate(([-1.0], inner, [1.0]))
    w = 2.0 / (n * (n - 1) * pn1(x) ** 2)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _bary_weights(n: int):
    u, _ = lobatto(n)
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, 1.0)
    return 1.0 / d.prod(axis=1)


def lagrange_matrix(n: int, pts):
    """Matrix L with L[i, m] = ell_m(pts[i]) for the Lobatto basis on [0, 1]."""
    u, _ = lobatto(n)
    bw = _bary_weights(n)
    pts = np.asarray(pts, dtype=float).ravel()
    diff = pts[:, None] - u[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    t = bw[None, :] / diff
    out = t / t.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    out[rows] = hit[rows].astype(float)
    return out


@lru_cache(maxsize=None)
def _diff_matrix(n: int):
    u, _ = lobatto(n)
    bw = _bary_weights(n)
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, 1.0)
    D = (bw[None, :] / bw[:, None]) / d
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@lru_cache(maxsize=None)
def _local_tables(n: int):
    """Gauss data for the forward/backward local weight matrices."""
    u, _ = lobatto(n)
    gx, gw = _leg.leggauss(_N_GAUSS)
    s = 0.5 * (gx + 1.0)
    g = 0.5 * gw
    Bf = lagrange_matrix(n, (u[:, None] * s[None, :])).reshape(n, _N_GAUSS, n)
    Bb = lagrange_matrix(n, (u[:, None] + (1.0 - u[:, None]) * s[None, :])).reshape(n, _N_GAUSS, n)
    return u, s, g, Bf, Bb


def local_matrices(n: int, kappa, h, backward=False):
    """Local weight matrices and carry phases for scaled exponents ``kappa``.

    For kind ``c`` with width ``h[c]`` and ``kappa[c] = lam * h[c]``,
    ``W[c] @ f`` gives ``int_a^{x_j} exp(lam (x_j - t)) f`` (forward) or
    ``int_{x_j}^b exp(lam (t - x_j)) f`` (backward) from nodal values ``f``.
    """
    u, s, g, Bf, Bb = _local_tables(n)
    kappa = np.asarray(kappa, dtype=complex)[:, None, None]
    h = np.asarray(h, dtype=float)[:, None, None]
    if backward:
        span = (1.0 - u)[None, :, None]
        E = np.exp(kappa * span * s[None, None, :]) * g[None, None, :]
        W = h * span * np.einsum("cjq,jqm->cjm", E, Bb)
        phase = np.exp(kappa[:, :, 0] * (1.0 - u)[None, :])
    else:
        span = u[None, :, None]
        E = np.exp(kappa * span * (1.0 - s)[None, None, :]) * g[None, None, :]
        W = h * span * np.einsum("cjq,jqm->cjm", E, Bf)
        phase = np.exp(kappa[:, :, 0] * u[None, :])
    return np.ascontiguousarray(W), np.ascontiguousarray(phase)


@dataclass(frozen=True, eq=False)
class Grid:
    """Composite grid: subcell edges, owning potential cell, Lobatto nodes."""

    edges: np.ndarray  # (K + 1,)
    kind: np.ndarray  # (K,) index into kind_width
    kind_width: np.ndarray  # (C,)
    n: int = N_NODES
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_sub(self):
        return len(self.edges) - 1

    @property
    def size(self):
        return self.n_sub * self.n

    @property
    def widths(self):
        return self.kind_width[self.kind]

    @property
    def nodes(self):
        if "nodes" not in self._cache:
            u, _ = lobatto(self.n)
            self._cache["nodes"] = self.edges[:-1, None] + self.widths[:, None] * u[None, :]
        return self._cache["nodes"]

    @property
    def weights(self):
        """Composite Lobatto quadrature weights, shape (K, n)."""
        if "weights" not in self._cache:
            _, w = lobatto(self.n)
            self._cache["weights"] = self.widths[:, None] * w[None, :]
        return self._cache["weights"]

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def matrices(self, lam: complex, backward: bool):
        key = ("W", complex(lam), bool(backward))
        if key not in self._cache:
            self._cache[key] = local_matrices(self.n, lam * self.kind_width, self.kind_width, backward)
        return self._cache[key]

    def sample(self, poly) -> "GridFunction":
        """Nodal values of a piecewise polynomial whose breakpoints are grid edges."""
        cell = poly.cell_index(self.midpoints)
        return GridFunction(self, poly.eval_cell(cell[:, None], self.nodes))

    def sample_func(self, func) -> "GridFunction":
        return GridFunction(self, np.asarray(func(self.nodes), dtype=complex))

    def constant(self, value=1.0) -> "GridFunction":
        return GridFunction(self, np.full((self.n_sub, self.n), value, dtype=complex))

    def exp(self, c: complex) -> "GridFunction":
        """Nodal values of exp(c t)."""
        return GridFunction(self, np.exp(c * self.nodes))

    def locate(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.n_sub - 1)
        return k, (x - self.edges[k]) / self.widths[k]


def subcell_counts(mesh, mu_abs, density=1.0, min_sub=MIN_SUBCELLS):
    widths = np.diff(mesh)
    per_len = max(density * mu_abs, mu_abs / 4.0)
    return np.maximum(min_sub, np.ceil(per_len * widths - 1e-9).astype(int))


_GRID_CACHE: dict = {}


def make_grid(mesh, mu, density: float = 1.0, n: int = N_NODES, min_sub: int = MIN_SUBCELLS) -> Grid:
    """Grid resolving ``exp(2 i mu t)`` on the cells of ``mesh``."""
    mesh = np.asarray(mesh, dtype=float)
    mu_abs = abs(complex(mu))
    counts = subcell_counts(mesh, mu_abs, density, min_sub)
    key = (mesh.tobytes(), tuple(counts), n)
    g = _GRID_CACHE.get(key)
    if g is not None:
        return g
    edges = [mesh[:1]]
    for a, b, m in zip(mesh[:-1], mesh[1:], counts):
        e = np.linspace(a, b, m + 1)[1:]
        e[-1] = b
        edges.append(e)
    edges = np.concatenate(edges)
    kind = np.repeat(np.arange(len(counts)), counts).astype(np.intp)
    g = Grid(edges, kind, np.diff(mesh) / counts, n)
    if len(_GRID_CACHE) > 256:
        _GRID_CACHE.clear()
    _GRID_CACHE[key] = g
    return g


class GridMismatch(ValueError):
    """Operands live on different grids."""


class GridFunction:
    """Complex nodal values on a :class:`Grid`, interpolated per subcell."""

    __slots__ = ("grid", "values")
    __array_priority__ = 100

    def __init__(self, grid: Grid, values):
        self.grid = grid
        self.values = np.asarray(values, dtype=complex).reshape(grid.n_sub, grid.n)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid is not self.grid:
                raise GridMismatch("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, o):
        return GridFunction(self.grid, self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return GridFunction(self.grid, self.values - self._other(o))

    def __rsub__(self, o):
        return GridFunction(self.grid, self._other(o) - self.values)

    def __mul__(self, o):
        return GridFunction(self.grid, self.values * self._other(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return GridFunction(self.grid, self.values / self._other(o))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __pow__(self, k):
        return GridFunction(self.grid, self.values**k)

    def conj(self):
        return GridFunction(self.grid, self.values.conj())

    def abs(self):
        return GridFunction(self.grid, np.abs(self.values))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k, u = self.grid.locate(x.ravel())
        L = lagrange_matrix(self.grid.n, u)
        out = np.einsum("im,im->i", L, self.values[k])
        return out.reshape(x.shape) if x.shape else complex(out[0])

    @property
    def at0(self) -> complex:
        return complex(self.values[0, 0])

    @property
    def at1(self) -> complex:
        return complex(self.values[-1, -1])

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def sup_refined(self) -> float:
        """max |f| with the node maximum polished on the interpolant."""
        m = np.abs(self.values)
        if not m.size:
            return 0.0
        k, j = np.unravel_index(np.argmax(m), m.shape)
        best = float(m[k, j])
        if best == 0.0 or not np.isfinite(best):
            return best
        e = self.grid.edges
        lo, hi = e[max(k - 1, 0)] if j == 0 else e[k], e[min(k + 2, len(e) - 1)] if j == self.grid.n - 1 else e[k + 1]
        res = minimize_scalar(lambda x: -abs(self(x)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        return max(best, float(-res.fun))

    def integral(self) -> complex:
        return complex(np.sum(self.grid.weights * self.values))

    def lq_norm(self, q) -> float:
        m = np.abs(self.values)
        if np.isinf(q):
            return self.sup_refined()
        return float(np.sum(self.grid.weights * m**q) ** (1.0 / q))

    def derivative(self) -> "GridFunction":
        D = _diff_matrix(self.grid.n)
        return GridFunction(self.grid, (self.values @ D.T) / self.grid.widths[:, None])

    def with_values(self, values):
        return GridFunction(self.grid, values)

    def __repr__(self):
        return f"GridFunction(n_sub={self.grid.n_sub}, n={self.grid.n}, sup={self.sup():.3e})"


def running(f: GridFunction, lam: complex = 0.0, backward: bool = False) -> GridFunction:
    """Exponentially weighted running integral of ``f`` (see module docstring)."""
    g = f.grid
    if not np.any(f.values):
        return GridFunction(g, np.zeros_like(f.values))
    W, phase = g.matrices(lam, backward)
    loc = kernels.apply_local(W, np.ascontiguousarray(f.values), g.kind)
    if backward:
        out = kernels.running_backward(loc, phase, g.kind)
    else:
        out = kernels.running_forward(loc, phase, g.kind)
    return GridFunction(g, out)


def fwd(f: GridFunction, lam: complex = 0.0) -> GridFunction:
    """``x -> int_0^x exp(lam (x - t)) f(t) dt``."""
    return running(f, lam, backward=False)


def bwd(f: GridFunction, lam: complex = 0.0) -> GridFunction:
    """``x -> int_x^1 exp(lam (t - x)) f(t) dt``."""
    return running(f, lam, backward=True)


def cumint(f: GridFunction) -> GridFunction:
    return running(f, 0.0, backward=False)


def tailint(f: GridFunction) -> GridFunction:
    return running(f, 0.0, backward=True)


def scaled_exp(x, mu: complex):
    """exp(i mu x) / (|exp(i mu x)| + |exp(-i mu x)|) and its mirror, overflow-free."""
    x = np.asarray(x, dtype=float)
    y = complex(mu).imag * x
    ph = np.exp(1j * complex(mu).real * x)
    lo = 0.5 * (1.0 - np.tanh(y))  # e^{-y} / (e^{-y} + e^{y})
    return ph * lo, (1.0 - lo) / ph

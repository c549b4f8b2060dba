"""Time the compiled and pure-Python running-integral kernels.

Usage: python benchmarks/bench_kernels.py [--mu 400] [--repeat 20]

Both backends are fed the same local tables, so the comparison covers
only the per-subcell matrix application and the carry recursion.
"""
import argparse
import time

import numpy as np

from dirac_asym import _pykernels
from dirac_asym.grid import make_grid

try:
    from dirac_asym import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(mu, repeat, n_cells=8):
    mesh = np.linspace(0.0, 1.0, n_cells + 1)
    grid = make_grid(mesh, mu)
    rng = np.random.default_rng(0)
    f = np.ascontiguousarray(rng.normal(size=grid.nodes.shape) + 1j * rng.normal(size=grid.nodes.shape))
    W, phase = grid.matrices(2j * mu, False)
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    results = {}
    ref = None
    for name, mod in backends.items():
        def run():
            loc = mod.apply_local(W, f, grid.kind)
            return mod.running_forward(loc, phase, grid.kind)

        out = run()
        ref = out if ref is None else ref
        results[name] = (_time(run, repeat), float(np.max(np.abs(out - ref))))
    return grid, results


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mu", type=float, nargs="*", default=[40.0, 400.0, 4000.0])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    print(f"{'mu':>8} {'subcells':>9} {'backend':>8} {'best [ms]':>10} {'max diff':>10}")
    for mu in args.mu:
        grid, res = bench(mu, args.repeat)
        for name, (t, diff) in res.items():
            print(f"{mu:8.0f} {grid.n_sub:9d} {name:>8} {1e3 * t:10.3f} {diff:10.2e}")


if __name__ == "__main__":
    main()

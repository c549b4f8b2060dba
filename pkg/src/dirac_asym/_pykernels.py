"""Pure-Python versions of the compiled kernels in ``_ckernels.pyx``.

Subcells of one mesh cell share their phase row, so the carry recursion is
a constant-coefficient linear filter inside each cell run.
"""
import numpy as np
from scipy.signal import lfilter


def _runs(cell_of):
    """Yield (start, stop, cell) for maximal runs of equal cell index."""
    if len(cell_of) == 0:
        return
    breaks = np.flatnonzero(np.diff(cell_of)) + 1
    starts = np.concatenate(([0], breaks))
    stops = np.concatenate((breaks, [len(cell_of)]))
    for a, b in zip(starts, stops):
        yield a, b, cell_of[a]


def running_forward(loc, phase, cell_of):
    K, n = loc.shape
    out = np.empty((K, n), dtype=np.complex128)
    carry = 0j
    for a, b, c in _runs(cell_of):
        s = phase[c, n - 1]
        ends = lfilter([1.0], [1.0, -s], loc[a:b, n - 1], zi=[s * carry])[0]
        starts = np.concatenate(([carry], ends[:-1]))
        out[a:b] = phase[c][None, :] * starts[:, None] + loc[a:b]
        carry = ends[-1]
    return out


def running_backward(loc, phase, cell_of):
    K, n = loc.shape
    out = np.empty((K, n), dtype=np.complex128)
    carry = 0j
    for a, b, c in reversed(list(_runs(cell_of))):
        s = phase[c, 0]
        ends = lfilter([1.0], [1.0, -s], loc[a:b, 0][::-1], zi=[s * carry])[0][::-1]
        starts = np.concatenate((ends[1:], [carry]))
        out[a:b] = phase[c][None, :] * starts[:, None] + loc[a:b]
        carry = ends[0]
    return out


def apply_local(mats, f, cell_of):
    out = np.empty_like(f, dtype=np.complex128)
    for a, b, c in _runs(cell_of):
        out[a:b] = f[a:b] @ mats[c].T
    return out

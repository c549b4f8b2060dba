# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled carry recursions for exponentially weighted running integrals."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def running_forward(double complex[:, ::1] loc, double complex[:, ::1] phase,
                    cnp.intp_t[::1] cell_of):
    cdef Py_ssize_t K = loc.shape[0], n = loc.shape[1]
    cdef Py_ssize_t k, j, c
    cdef double complex carry = 0
    out = np.empty((K, n), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    for k in range(K):
        c = cell_of[k]
        for j in range(n):
            o[k, j] = phase[c, j] * carry + loc[k, j]
        carry = o[k, n - 1]
    return out


def running_backward(double complex[:, ::1] loc, double complex[:, ::1] phase,
                     cnp.intp_t[::1] cell_of):
    cdef Py_ssize_t K = loc.shape[0], n = loc.shape[1]
    cdef Py_ssize_t k, j, c
    cdef double complex carry = 0
    out = np.empty((K, n), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    for k in range(K - 1, -1, -1):
        c = cell_of[k]
        for j in range(n):
            o[k, j] = phase[c, j] * carry + loc[k, j]
        carry = o[k, 0]
    return out


# below this run length the scalar loop beats a BLAS call
cdef Py_ssize_t SHORT_RUN = 16


def apply_local(double complex[:, :, ::1] mats, double complex[:, ::1] f,
                cnp.intp_t[::1] cell_of):
    """Per-subcell matrix-vector products ``mats[cell_of[k]] @ f[k]``.

    Long runs of subcells sharing a cell go through one matrix product.
    """
    cdef Py_ssize_t K = f.shape[0], n = f.shape[1]
    cdef Py_ssize_t k, j, m, c, a, i
    cdef double complex acc
    out = np.empty((K, n), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    mats_np = np.asarray(mats)
    f_np = np.asarray(f)
    a = 0
    while a < K:
        c = cell_of[a]
        k = a
        while k < K and cell_of[k] == c:
            k += 1
        if k - a >= SHORT_RUN:
            np.matmul(f_np[a:k], mats_np[c].T, out=out[a:k])
        else:
            for m in range(a, k):
                for j in range(n):
                    acc = 0
                    for i in range(n):
                        acc = acc + mats[c, j, i] * f[m, i]
                    o[m, j] = acc
        a = k
    return out

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: tridiagonal solve and the exact OU update."""
import numpy as np


def tridiag_solve(const double[::1] lower, const double[::1] diag,
                  const double[::1] upper, const double[::1] rhs):
    """Thomas algorithm for a diagonally dominant tridiagonal system.

    ``lower[i]`` is entry (i+1, i) and ``upper[i]`` is entry (i, i+1).
    """
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double denom
    out = np.empty(n, dtype=np.float64)
    scratch = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    cdef double[::1] c = scratch
    if n == 0:
        return out
    denom = diag[0]
    c[0] = upper[0] / denom if n > 1 else 0.0
    x[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = upper[i] / denom
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return out


def ou_update(const double[:, ::1] v, const double[:, ::1] xi, double decay,
              const double[::1] amp, const double[:, ::1] z,
              const double[:, ::1] basis):
    """Rows of ``xi + (v - xi) * decay + (amp * z) @ basis``."""
    cdef Py_ssize_t S = v.shape[0]
    cdef Py_ssize_t N = v.shape[1]
    cdef Py_ssize_t K = basis.shape[0]
    cdef Py_ssize_t s, k, j
    cdef double c
    out = np.empty((S, N), dtype=np.float64)
    cdef double[:, ::1] w = out
    for s in range(S):
        for j in range(N):
            w[s, j] = xi[s, j] + (v[s, j] - xi[s, j]) * decay
        for k in range(K):
            c = amp[k] * z[s, k]
            if c == 0.0:
                continue
            for j in range(N):
                w[s, j] += c * basis[k, j]
    return out

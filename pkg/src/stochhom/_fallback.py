"""Numpy/scipy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.linalg import solve_banded


def tridiag_solve(lower, diag, upper, rhs):
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def ou_update(v, xi, decay, amp, z, basis):
    return xi + (v - xi) * decay + (z * amp) @ basis

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochhom import kernels

BACKENDS = sorted(kernels.available_backends())


def dominant_tridiag(n, seed):
    rng = np.random.default_rng(seed)
    lower = rng.uniform(-1, 0, n - 1)
    upper = rng.uniform(-1, 0, n - 1)
    diag = 2.5 + rng.uniform(0, 1, n)
    return lower, diag, upper, rng.standard_normal(n)


@pytest.mark.parametrize("backend", BACKENDS)
def test_tridiag_matches_dense(backend):
    lower, diag, upper, rhs = dominant_tridiag(17, 0)
    A = np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)
    x = kernels.get_backend(backend).tridiag_solve(lower, diag, upper, rhs)
    np.testing.assert_allclose(A @ x, rhs, atol=1e-12)


@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_backends_agree_tridiag(n, seed):
    lower, diag, upper, rhs = dominant_tridiag(n, seed)
    ref = kernels.get_backend("python").tridiag_solve(lower, diag, upper, rhs)
    for name in BACKENDS:
        out = kernels.get_backend(name).tridiag_solve(lower, diag, upper, rhs)
        np.testing.assert_allclose(out, ref, rtol=1e-11, atol=1e-13)


@given(st.integers(1, 20), st.integers(1, 50), st.integers(1, 12), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_backends_agree_ou(samples, n, modes, decay, seed):
    rng = np.random.default_rng(seed)
    v, xi = rng.standard_normal((2, samples, n))
    amp = rng.uniform(0, 1, modes)
    z = rng.standard_normal((samples, modes))
    basis = rng.standard_normal((modes, n))
    ref = kernels.get_backend("python").ou_update(v, xi, decay, amp, z, basis)
    for name in BACKENDS:
        out = kernels.get_backend(name).ou_update(v, xi, decay, amp, z, basis)
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_wrapper_handles_single_field_and_broadcast():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(6)
    basis = rng.standard_normal((3, 6))
    z = rng.standard_normal(3)
    out = kernels.ou_update(v, 0.5, 0.25, np.ones(3), z, basis)
    np.testing.assert_allclose(out, 0.5 + (v - 0.5) * 0.25 + z @ basis, rtol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, STOCHHOM_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from stochhom import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"

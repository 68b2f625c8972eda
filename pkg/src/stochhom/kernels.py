"""Backend selection for the hot kernels.

The compiled extension ``stochhom._kernels`` is used when it was built;
otherwise the numpy implementations in ``stochhom._fallback`` are used.
Set ``STOCHHOM_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("STOCHHOM_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback

__all__ = ["BACKEND", "tridiag_solve", "ou_update", "available_backends", "get_backend"]


def available_backends():
    return {"python": _fallback} | ({"compiled": _compiled} if _compiled is not None else {})


def get_backend(name):
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available") from None


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system; bands as in ``scipy.linalg.solve_banded``
    order but passed separately (``lower[i] = A[i+1, i]``)."""
    return _impl.tridiag_solve(
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(diag, dtype=np.float64),
        np.ascontiguousarray(upper, dtype=np.float64),
        np.ascontiguousarray(rhs, dtype=np.float64),
    )


def ou_update(v, xi, decay, amp, z, basis):
    """Exact OU increment for a batch of fields.

    ``v`` has shape (S, N) or (N,), ``xi`` broadcasts against it, ``z`` has
    shape (S, K) (or (K,)) and ``basis`` shape (K, N).
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    v2 = np.atleast_2d(v)
    xi2 = np.ascontiguousarray(np.broadcast_to(xi, v2.shape), dtype=np.float64)
    z2 = np.ascontiguousarray(np.atleast_2d(z), dtype=np.float64)
    out = _impl.ou_update(
        np.ascontiguousarray(v2),
        xi2,
        float(decay),
        np.ascontiguousarray(amp, dtype=np.float64),
        z2,
        np.ascontiguousarray(basis, dtype=np.float64),
    )
    return out[0] if single else out

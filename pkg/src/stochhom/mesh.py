"""Uniform Dirichlet grids on (0, 1)^d, discrete norms and the
finite-volume diffusion operator.

Fields are flat float arrays of length ``grid.size`` in C order (the first
axis is x_1).  Stencil of ``assemble_diffusion`` for ``div(A grad u)``:

* diagonal part: ``-sum_k D_k^T W_k D_k`` where ``D_k`` is the one-sided
  difference onto the faces normal to axis k (zero ghost values on the
  boundary) and ``W_k`` holds the harmonic mean of ``A_kk`` sampled at the
  two points adjacent to each face;
* off-diagonal part: ``sum_{k != l} C_k diag(A_kl) C_l`` with centred
  differences ``C_k``.  Both parts are symmetric matrices.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels
from .errors import SolverError

SYMMETRY_TOL = 1e-12
SOLVE_RTOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Interior nodes ``x = (i + 1) h``, ``i = 0..n-1``, per axis."""

    d: int
    n: int

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    @property
    def cell_volume(self):
        return self.h**self.d

    @cached_property
    def axis_coords(self):
        return np.arange(1, self.n + 1) * self.h

    @cached_property
    def points(self):
        """Node coordinates, shape (size, d)."""
        mesh = np.meshgrid(*([self.axis_coords] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def face_diffs(self):
        """One-sided difference matrices ``D_k``, one per axis."""
        return [_kron_axis(_dirichlet_diff(self.n, self.h), k, self.d, self.n) for k in range(self.d)]

    @cached_property
    def central_diffs(self):
        return [_kron_axis(_dirichlet_central(self.n, self.h), k, self.d, self.n) for k in range(self.d)]

    def face_points(self, axis):
        """Left and right sample points for every face normal to ``axis``.

        Faces along ``axis`` sit between nodes i-1 and i for i = 0..n, where
        nodes -1 and n are the boundary points 0 and 1.
        """
        along = np.arange(self.n + 1) * self.h
        others = [self.axis_coords] * self.d
        left_axes = list(others)
        right_axes = list(others)
        left_axes[axis] = along
        right_axes[axis] = along + self.h
        left = np.stack([m.ravel() for m in np.meshgrid(*left_axes, indexing="ij")], axis=-1)
        right = np.stack([m.ravel() for m in np.meshgrid(*right_axes, indexing="ij")], axis=-1)
        return left, right

    def sample(self, func):
        """Evaluate ``func(points)`` on the nodes."""
        return np.asarray(func(self.points), dtype=float).reshape(self.size)

    def inner(self, u, v):
        return self.cell_volume * float(np.dot(u, v))


def _dirichlet_diff(n, h):
    # (n+1) x n: face f carries (u_f - u_{f-1}) / h with zero ghosts
    rows = np.arange(n + 1)
    data = np.concatenate([np.ones(n), -np.ones(n)]) / h
    r = np.concatenate([rows[:n], rows[1:]])
    c = np.concatenate([np.arange(n), np.arange(n)])
    return sp.csr_matrix((data, (r, c)), shape=(n + 1, n))


def _dirichlet_central(n, h):
    return sp.diags([np.full(n - 1, -0.5 / h), np.full(n - 1, 0.5 / h)], [-1, 1], shape=(n, n), format="csr")


def _kron_axis(mat, axis, d, n):
    eye = sp.identity(n, format="csr")
    out = None
    for k in range(d):
        factor = mat if k == axis else eye
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def build_grid(d, n):
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}; expected 1 or 2")
    if n < 3:
        raise ValueError(f"need at least 3 interior points per axis, got {n}")
    return Grid(d, n)


def norms(grid, u):
    """Discrete (L2, H1-seminorm, Linf) of a field."""
    u = np.asarray(u, dtype=float)
    l2 = np.sqrt(grid.cell_volume * np.sum(u**2))
    h1 = np.sqrt(grid.cell_volume * sum(np.sum((D @ u) ** 2) for D in grid.face_diffs))
    linf = float(np.max(np.abs(u))) if u.size else 0.0
    return float(l2), float(h1), linf


def check_matrices(mats, where="sample"):
    """Reject non-symmetric samples.  ``mats`` has shape (..., d, d)."""
    asym = np.abs(mats - np.swapaxes(mats, -1, -2))
    scale = max(1.0, float(np.max(np.abs(mats))))
    if np.max(asym) > SYMMETRY_TOL * scale:
        idx = np.unravel_index(np.argmax(asym.max(axis=(-1, -2))), mats.shape[:-2])
        raise ValueError(f"non-symmetric coefficient at {where} index {idx}")


def harmonic_mean(a, b):
    return 2.0 * a * b / (a + b)


@dataclass(frozen=True)
class DiffusionOperator:
    """Assembled ``u -> div(A grad u)``; ``matrix`` is symmetric NSD."""

    grid: Grid
    matrix: sp.csr_matrix
    face_coeffs: tuple  # per axis, harmonic face values of A_kk
    min_face_coeff: float

    def apply(self, u):
        return self.matrix @ u

    @cached_property
    def bands(self):
        """(lower, diag, upper) of the matrix in 1D."""
        if self.grid.d != 1:
            raise ValueError("bands are only defined in 1D")
        return tuple(self.matrix.diagonal(k).copy() for k in (-1, 0, 1))

    def energy(self, u):
        """``<-L u, u>`` in the discrete inner product."""
        return -self.grid.inner(self.matrix @ u, u)


def assemble_diffusion(grid, coeff):
    """Assemble div(A grad .) for a matrix-field sampler.

    ``coeff(x)`` takes points of shape (P, d) and returns (P, d, d)
    symmetric positive definite matrices.
    """
    d = grid.d
    size = grid.size
    L = sp.csr_matrix((size, size))
    face_coeffs = []
    for k in range(d):
        left, right = grid.face_points(k)
        a_left = np.asarray(coeff(left), dtype=float).reshape(-1, d, d)
        a_right = np.asarray(coeff(right), dtype=float).reshape(-1, d, d)
        check_matrices(a_left, "face")
        check_matrices(a_right, "face")
        akk_l, akk_r = a_left[:, k, k], a_right[:, k, k]
        if np.any(akk_l <= 0) or np.any(akk_r <= 0):
            raise ValueError("non-elliptic coefficient: nonpositive diagonal entry")
        w = harmonic_mean(akk_l, akk_r)
        face_coeffs.append(w)
        D = grid.face_diffs[k]
        L = L - D.T @ sp.diags(w) @ D
    node_a = np.asarray(coeff(grid.points), dtype=float).reshape(-1, d, d)
    check_matrices(node_a, "node")
    eig = np.linalg.eigvalsh(node_a)
    if np.any(eig[:, 0] <= 0):
        raise ValueError("non-elliptic coefficient: nonpositive eigenvalue")
    for k in range(d):
        for l in range(d):
            if k != l and np.any(node_a[:, k, l] != 0):
                L = L + grid.central_diffs[k] @ sp.diags(node_a[:, k, l]) @ grid.central_diffs[l]
    L = sp.csr_matrix(L)
    L.sum_duplicates()
    L.eliminate_zeros()
    return DiffusionOperator(grid, L, tuple(face_coeffs), float(min(w.min() for w in face_coeffs)))


def constant_coeff(tensor):
    """Sampler for a constant matrix."""
    tensor = np.atleast_2d(np.asarray(tensor, dtype=float))

    def sampler(x):
        return np.broadcast_to(tensor, (len(x),) + tensor.shape)

    return sampler


class ImplicitSolver:
    """Reusable solver for ``(I - dt L) w = rhs`` with fixed ``L`` and ``dt``."""

    def __init__(self, op, dt):
        if dt <= 0:
            raise ValueError("time step must be positive")
        self.op = op
        self.dt = float(dt)
        size = op.grid.size
        self.system = sp.csr_matrix(sp.identity(size) - self.dt * op.matrix)
        if op.grid.d == 1:
            self._bands = (
                self.system.diagonal(-1).copy(),
                self.system.diagonal(0).copy(),
                self.system.diagonal(1).copy(),
            )
        else:
            inv_diag = 1.0 / self.system.diagonal()
            self._precond = LinearOperator((size, size), matvec=lambda r: inv_diag * r)

    def __call__(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            return np.zeros_like(rhs)
        if self.op.grid.d == 1:
            w = kernels.tridiag_solve(*self._bands, rhs)
        else:
            w, info = cg(self.system, rhs, rtol=SOLVE_RTOL * 0.1, atol=0.0, M=self._precond, maxiter=10 * rhs.size)
            if info != 0:
                res = np.linalg.norm(self.system @ w - rhs) / bnorm
                raise SolverError(f"conjugate gradient stopped (info={info}), relative residual {res:.3e}", res)
        res = np.linalg.norm(self.system @ w - rhs) / bnorm
        if not np.isfinite(res) or res > SOLVE_RTOL:
            raise SolverError(f"implicit solve residual {res:.3e} exceeds {SOLVE_RTOL:.0e}", res)
        return w


def solve_implicit(op, dt, rhs):
    """Backward-Euler diffusion solve ``(I - dt L) w = rhs``."""
    return ImplicitSolver(op, dt)(rhs)

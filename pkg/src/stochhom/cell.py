"""Periodic cell problems and the homogenized tensor.

For each unit direction e_j the corrector solves
``div(A (e_j + grad chi_j)) = 0`` on the torus with zero mean, using the
periodic analogue of the stencil in :mod:`stochhom.mesh`.  The constant
null space is removed with a zero-mean Lagrange multiplier (a symmetric
bordered system).
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import SolverError
from .mesh import harmonic_mean
from .problems import cell_lattice

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class PeriodicGrid:
    d: int
    m: int

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def size(self):
        return self.m**self.d

    @cached_property
    def points(self):
        return cell_lattice(self.d, self.m)

    def _kron(self, mat, axis):
        eye = sp.identity(self.m, format="csr")
        out = None
        for k in range(self.d):
            f = mat if k == axis else eye
            out = f if out is None else sp.kron(out, f, format="csr")
        return out

    @cached_property
    def forward_diffs(self):
        # face j sits at y_j + h/2 e_k and carries (u_{j+1} - u_j) / h
        m, h = self.m, self.h
        D = (sp.diags([-np.ones(m), np.ones(m - 1)], [0, 1], shape=(m, m), format="lil"))
        D[m - 1, 0] = 1.0
        D = sp.csr_matrix(D) / h
        return [self._kron(D, k) for k in range(self.d)]

    @cached_property
    def central_diffs(self):
        m, h = self.m, self.h
        C = sp.lil_matrix((m, m))
        for j in range(m):
            C[j, (j + 1) % m] += 0.5 / h
            C[j, (j - 1) % m] -= 0.5 / h
        C = sp.csr_matrix(C)
        return [self._kron(C, k) for k in range(self.d)]


@dataclass(frozen=True)
class CellSolution:
    """Zero-mean correctors ``chi[j]`` (and adjoint ``chi_adj[j]``) on the
    periodic cell grid, flattened in C order."""

    grid: PeriodicGrid
    matrix_name: str
    chi: np.ndarray
    chi_adj: np.ndarray
    residual: float
    residual_adj: float

    @property
    def m(self):
        return self.grid.m

    def face_gradients(self, adjoint=False):
        """``g[j, k]`` = forward difference of chi_j along axis k."""
        chi = self.chi_adj if adjoint else self.chi
        return np.stack([[D @ c for D in self.grid.forward_diffs] for c in chi])


@dataclass(frozen=True)
class EffectiveTensor:
    matrix: np.ndarray
    eig_min: float
    eig_max: float


class _CellOperator:
    def __init__(self, A, grid):
        self.grid = grid
        d = grid.d
        node = A(grid.points)
        self.node = node
        self.face = []
        M = sp.csr_matrix((grid.size, grid.size))
        for k in range(d):
            right = A(grid.points + grid.h * np.eye(d)[k])
            w = harmonic_mean(node[:, k, k], right[:, k, k])
            self.face.append(w)
            D = grid.forward_diffs[k]
            M = M + D.T @ sp.diags(w) @ D
        for k in range(d):
            for l in range(d):
                if k != l and np.any(node[:, k, l] != 0):
                    M = M - grid.central_diffs[k] @ sp.diags(node[:, k, l]) @ grid.central_diffs[l]
        self.M = sp.csr_matrix(M)

    def rhs(self, j):
        g = self.grid
        b = -(g.forward_diffs[j].T @ self.face[j])
        for k in range(g.d):
            if k != j and np.any(self.node[:, k, j] != 0):
                b = b + g.central_diffs[k] @ self.node[:, k, j]
        return b

    def solve(self, j):
        n = self.grid.size
        b = self.rhs(j)
        e = sp.csr_matrix(np.ones((n, 1)))
        K = sp.bmat([[self.M, e], [e.T, None]], format="csc")
        sol = spsolve(K, np.concatenate([b, [0.0]]))
        chi = sol[:n]
        if not np.all(np.isfinite(chi)):
            raise SolverError("cell problem is singular beyond the constant mode")
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(self.M @ chi - b) / bnorm if bnorm > 0 else float(np.linalg.norm(self.M @ chi))
        if res > RESIDUAL_TOL:
            raise SolverError(f"cell problem residual {res:.3e} exceeds {RESIDUAL_TOL:.0e}", res)
        return chi - chi.mean(), res

    def flux_average(self, chi):
        """Midpoint average of ``A (I + grad chi)`` using face and node values."""
        g = self.grid
        d = g.d
        out = np.zeros((d, d))
        for j in range(d):
            for i in range(d):
                val = np.mean(self.face[i] * ((i == j) + g.forward_diffs[i] @ chi[j]))
                for k in range(d):
                    if k != i:
                        val += np.mean(self.node[:, i, k] * ((k == j) + g.central_diffs[k] @ chi[j]))
                out[i, j] = val
        return out


def solve_cell(A, m_pts, adjoint=True):
    """Solve the cell problems for ``A`` on an ``m_pts``-per-axis torus grid."""
    if m_pts < 8:
        raise ValueError(f"cell resolution must be at least 8, got {m_pts}")
    grid = PeriodicGrid(A.dim, m_pts)
    op = _CellOperator(A, grid)
    chi, res = zip(*(op.solve(j) for j in range(A.dim)))
    if adjoint:
        op_adj = _CellOperator(A.transpose(), grid)
        chi_adj, res_adj = zip(*(op_adj.solve(j) for j in range(A.dim)))
    else:
        chi_adj, res_adj = chi, res
    return CellSolution(grid, A.name, np.array(chi), np.array(chi_adj), max(res), max(res_adj))


def effective_tensor(A, sol, check=True):
    """Homogenized tensor ``int_Y A (I + grad chi) dy`` with an
    ellipticity certificate from its symmetric part."""
    Abar = _CellOperator(A, sol.grid).flux_average(sol.chi)
    eig = np.linalg.eigvalsh(0.5 * (Abar + Abar.T))
    tol = 10.0 * sol.grid.h
    if check and (eig[0] < A.m - tol or eig[-1] > A.M + tol):
        raise ValueError(f"effective tensor eigenvalues {eig} outside [{A.m - tol}, {A.M + tol}]")
    return EffectiveTensor(Abar, float(eig[0]), float(eig[-1]))


def effective_tensor_dual(A, sol):
    """``(int_Y A^T (I + grad chi*) dy)^T``; equals the primal tensor."""
    return _CellOperator(A.transpose(), sol.grid).flux_average(sol.chi_adj).T


def _periodic_interp(values, m, d, coords, offset):
    """Multilinear interpolation of node values on the m^d torus grid at
    ``coords`` (P, d) in [0, 1); node j of axis k sits at (j + offset[k]) / m."""
    vals = values.reshape((m,) * d)
    s = coords * m - np.asarray(offset)
    base = np.floor(s).astype(int)
    t = s - base
    out = np.zeros(len(coords))
    for corner in range(2**d):
        bits = [(corner >> k) & 1 for k in range(d)]
        weight = np.ones(len(coords))
        idx = []
        for k, b in enumerate(bits):
            weight *= t[:, k] if b else 1.0 - t[:, k]
            idx.append((base[:, k] + b) % m)
        out += weight * vals[tuple(idx)]
    return out


def corrector_field(sol, eps, grid, adjoint=False):
    """Sample ``chi(x / eps)`` and ``grad chi(x / eps)`` on the nodes of ``grid``.

    Returns ``(chi, grad)`` with shapes (d, N) and (d, d, N); ``grad[j, k]``
    is the derivative of chi_j along axis k, interpolated from face values.
    """
    d = sol.grid.d
    m = sol.m
    y = np.mod(grid.points / eps, 1.0)
    chi_nodes = sol.chi_adj if adjoint else sol.chi
    grads = sol.face_gradients(adjoint)
    chi = np.stack([_periodic_interp(c, m, d, y, np.zeros(d)) for c in chi_nodes])
    grad = np.empty((d, d, grid.size))
    for j in range(d):
        for k in range(d):
            offset = np.zeros(d)
            offset[k] = 0.5
            grad[j, k] = _periodic_interp(grads[j, k], m, d, y, offset)
    return chi, grad

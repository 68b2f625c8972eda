"""Reaction operators at the fine scale and their averages over the cell
and over the Gaussian invariant measure of the fast field.

Because alpha acts pointwise and the invariant measure has Gaussian
marginals N(xi(x), sigma^2(x)), the averages reduce to one-dimensional
Gauss-Hermite quadratures at every node.
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.interpolate import CubicSpline

from .problems import cell_lattice

DEFAULT_ORDER = 20
TABLE_POINTS = 4097


def alpha_eps(alpha, eps, grid, eta):
    """``alpha(x / eps, eta(x))`` at every node; ``eta`` may be batched (..., N)."""
    return alpha(grid.points / eps, eta)


def cell_midpoints(dim, m_y=None):
    m_y = m_y or (256 if dim == 1 else 64)
    return (cell_lattice(dim, m_y) + 0.5 / m_y)


def alpha_bar_Y(alpha, z, dim=1, m_y=None):
    """Midpoint-rule cell average ``int_Y alpha(y, z) dy`` for each z."""
    z = np.asarray(z, dtype=float)
    if not alpha.y_dependent:
        return alpha(np.zeros(z.shape + (dim,)), z)
    y = cell_midpoints(dim, m_y)
    flat = z.reshape(-1)
    out = np.empty(flat.shape)
    chunk = max(1, 2_000_000 // len(y))
    for i in range(0, len(flat), chunk):
        zz = flat[i : i + chunk]
        out[i : i + chunk] = np.mean(alpha(y[None, :, :], zz[:, None]), axis=1)
    return out.reshape(z.shape)


@dataclass
class AveragedReaction:
    """alpha together with the pointwise stationary variance on a grid."""

    alpha: object
    grid: object
    sigma2: np.ndarray
    order: int = DEFAULT_ORDER
    m_y: int | None = None
    xi_scale: float = 1.0
    _table: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        t, w = hermgauss(self.order)
        self.nodes = t
        self.weights = w / np.sqrt(np.pi)
        self.radius = 8.0 * (self.xi_scale + float(np.sqrt(self.sigma2.max(initial=0.0))))

    @property
    def dim(self):
        return self.grid.d

    def quadrature_points(self, xi):
        """Shape (G, ..., N): ``xi + sqrt(2 sigma^2) t_g``."""
        s = np.sqrt(2.0 * self.sigma2)
        return np.asarray(xi, dtype=float)[None, ...] + s * self.nodes.reshape((-1,) + (1,) * np.ndim(xi))

    def cell_average(self, z):
        return alpha_bar_Y(self.alpha, z, self.dim, self.m_y)

    def table(self):
        """Cubic interpolant of the cell average on [-radius, radius]."""
        if self._table is None:
            eta = np.linspace(-self.radius, self.radius, TABLE_POINTS)
            self._table = CubicSpline(eta, self.cell_average(eta))
        return self._table

    def cell_average_cached(self, z):
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape)
        inside = np.abs(z) <= self.radius
        out[inside] = self.table()(z[inside])
        if not inside.all():
            out[~inside] = self.cell_average(z[~inside])
        return out


def alpha_bar(avg, xi, cached=False):
    """``int (int_Y alpha(y, z) dy) dmu^xi(z)`` pointwise, by Gauss-Hermite."""
    pts = avg.quadrature_points(xi)
    vals = avg.cell_average_cached(pts) if cached else avg.cell_average(pts)
    return np.tensordot(avg.weights, vals, axes=1)


def alpha_bar_eps(avg, eps, xi):
    """``int alpha^eps(eta) dmu^xi(eta)`` pointwise, by Gauss-Hermite."""
    pts = avg.quadrature_points(xi)
    y = avg.grid.points / eps
    vals = avg.alpha(y, pts)
    return np.tensordot(avg.weights, vals, axes=1)


def make_averaged_reaction(alpha, grid, noise, order=DEFAULT_ORDER, **kw):
    """Build from a NoiseSpec (or a SpectralNoise already on ``grid``)."""
    spectral = noise.discretize(grid) if hasattr(noise, "discretize") else noise
    return AveragedReaction(alpha, grid, spectral.sigma2, order, **kw)

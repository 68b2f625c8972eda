"""Manufactured solution ubar(t, x) = exp(-t) prod sin(pi x_i) for the
averaged equation with zero reaction and Abar = c I."""
import dataclasses

import numpy as np

from stochhom.averaged import run_averaged
from stochhom.mesh import build_grid, norms
from stochhom.problems import constant_reaction, lookup


def exact(t, x):
    return np.exp(-t) * np.prod(np.sin(np.pi * x), axis=1)


def instance(c=0.5, T=0.5, dim=1, lam=None):
    """``lam`` replaces the continuous eigenvalue d pi^2 (e.g. by the discrete one)."""
    lam = dim * np.pi**2 if lam is None else lam

    def forcing(t, x):
        return (-1.0 + c * lam) * exact(t, x)

    inst = lookup("constant", dim=dim, alpha=constant_reaction(0.0), T=T)
    return dataclasses.replace(inst, forcing=forcing, u0=lambda x: exact(0.0, x))


def error(n, dt, c=0.5, T=0.5, discrete_space=False):
    grid = build_grid(1, n)
    lam = (2 - 2 * np.cos(np.pi * grid.h)) / grid.h**2 if discrete_space else None
    inst = instance(c, T, lam=lam)
    traj = run_averaged(inst, c * np.eye(1), None, dt, n=n, snapshot_times="all", reaction=lambda u: 0.0)
    return max(norms(grid, u - exact(t, grid.points))[0] for t, u in zip(traj.times, traj.u))


def observed_order(resolutions, errors):
    """Rate p in error ~ resolution^-p (resolution = points or 1/dt)."""
    return float(-np.polyfit(np.log(resolutions), np.log(errors), 1)[0])

"""Time integration of the coupled fine-scale system

    du = [div(A(x/eps) grad u) + alpha(x/eps, v) u + f] dt
    dv = -(v - u) dt / eps + sqrt(Q / eps) dW

Each step first advances v exactly with u frozen, then takes a backward
Euler diffusion step with the reaction evaluated explicitly at the new v.
"""
from dataclasses import dataclass, field

import numpy as np

from . import fast_ou
from .averaging import alpha_eps
from .errors import NumericalFailure
from .mesh import ImplicitSolver, assemble_diffusion, build_grid
from .stepping import EnergyDiagnostics, snapshot_steps

REACTION_MARGIN = 0.5


def resolving_points(eps, cells_per_period=8):
    """Smallest interior point count with h <= eps / cells_per_period."""
    return int(np.ceil(cells_per_period / eps - 1e-9)) - 1


def check_reaction_step(dt, alpha_sup):
    if dt * alpha_sup > REACTION_MARGIN + 1e-15:
        raise ValueError(f"dt * |alpha| = {dt * alpha_sup!r} exceeds {REACTION_MARGIN}")


@dataclass
class FineContext:
    grid: object
    eps: float
    alpha: object
    forcing: object
    noise: object  # SpectralNoise
    solver: ImplicitSolver
    m: float

    @classmethod
    def build(cls, instance, eps, dt, grid):
        op = assemble_diffusion(grid, instance.A.at_scale(eps))
        return cls(grid, eps, instance.alpha, instance.forcing, instance.noise.discretize(grid), ImplicitSolver(op, dt), instance.A.m)


def step_fine(u, v_state, t, dt, ctx):
    check_reaction_step(dt, ctx.alpha.sup)
    v_new = fast_ou.ou_step(v_state, u, dt)
    f = ctx.forcing(t, ctx.grid.points)
    rhs = u + dt * (alpha_eps(ctx.alpha, ctx.eps, ctx.grid, v_new.values) * u + f)
    if not np.all(np.isfinite(rhs)):
        raise NumericalFailure(f"non-finite reaction or forcing at t = {t!r} (step {v_state.step + 1})")
    u_new = ctx.solver(rhs)
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new.values))):
        raise NumericalFailure(f"non-finite state at t = {t + dt!r} (step {v_state.step + 1})")
    return u_new, v_new


@dataclass
class FineTrajectory:
    eps: float
    dt: float
    replica: int
    grid: object
    steps: np.ndarray
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    diagnostics: EnergyDiagnostics = field(default_factory=EnergyDiagnostics)


def run_fine(instance, eps, dt, n=None, snapshot_times=None, replica=0, observer=None, check_energy=True):
    """Integrate one replica of the fine system up to ``instance.T``.

    ``observer(k, t, u, v)`` is called after every step with the new state.
    """
    n = resolving_points(eps) if n is None else n
    grid = build_grid(instance.dim, n)
    if grid.h > eps / 8.0 * (1 + 1e-12):
        raise ValueError(f"grid does not resolve epsilon: h = {grid.h!r} > eps / 8 = {eps / 8!r}")
    check_reaction_step(dt, instance.alpha.sup)
    total, snap = snapshot_steps(instance.T, dt, snapshot_times)
    ctx = FineContext.build(instance, eps, dt, grid)
    u = grid.sample(instance.u0)
    v = fast_ou.start(grid.sample(instance.v0), ctx.noise, eps, instance.seed, replica, eps)
    diag = EnergyDiagnostics()
    diag.start(grid, u, v.values)
    u_snap, v_snap = [], []
    if snap[0] == 0:
        u_snap.append(u.copy())
        v_snap.append(v.values.copy())
    want = set(snap.tolist())
    for k in range(total):
        t = k * dt
        u_new, v = step_fine(u, v, t, dt, ctx)
        diag.update(grid, dt, u, u_new, v.values)
        if check_energy:
            diag.check_energy(grid, dt, ctx.m, instance.alpha.sup, u, u_new, instance.forcing(t, grid.points))
        u = u_new
        if observer is not None:
            observer(k + 1, (k + 1) * dt, u, v.values)
        if k + 1 in want:
            u_snap.append(u.copy())
            v_snap.append(v.values.copy())
    return FineTrajectory(eps, dt, replica, grid, snap, snap * dt, np.array(u_snap), np.array(v_snap), diag)

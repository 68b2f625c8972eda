"""Solver for the homogenized, averaged equation

    du/dt = div(Abar grad u) + alphabar(u) u + f

with the same backward Euler / explicit reaction scheme as the fine
solver, so that the two are compared scheme-for-scheme."""
from dataclasses import dataclass, field

import numpy as np

from .averaging import alpha_bar
from .errors import NumericalFailure
from .fine import check_reaction_step
from .mesh import ImplicitSolver, assemble_diffusion, build_grid, constant_coeff, norms
from .stepping import EnergyDiagnostics, snapshot_steps


@dataclass
class AveragedTrajectory:
    dt: float
    grid: object
    steps: np.ndarray
    times: np.ndarray
    u: np.ndarray
    diagnostics: EnergyDiagnostics = field(default_factory=EnergyDiagnostics)
    bound_margin: float = np.inf

    def at_steps(self, steps):
        idx = np.searchsorted(self.steps, steps)
        if np.any(self.steps[np.minimum(idx, len(self.steps) - 1)] != steps):
            raise ValueError("snapshot mismatch between trajectories")
        return self.u[idx]


def _tensor(Abar):
    return np.atleast_2d(getattr(Abar, "matrix", Abar))


def run_averaged(instance, Abar, avg, dt, n=None, snapshot_times=None, u0=None, reaction=None):
    """Integrate the averaged equation on the grid of ``avg`` (or a fresh
    ``n``-point grid when ``avg`` is None and ``reaction`` is given).

    ``reaction(u)`` overrides the averaged coefficient; by default it is
    ``alpha_bar(avg, u)`` evaluated through the cached cell-average table.
    """
    grid = avg.grid if avg is not None else build_grid(instance.dim, n)
    if reaction is None:
        reaction = lambda u: alpha_bar(avg, u, cached=True)  # noqa: E731
    sup = instance.alpha.sup
    check_reaction_step(dt, sup)
    total, snap = snapshot_steps(instance.T, dt, snapshot_times)
    solver = ImplicitSolver(assemble_diffusion(grid, constant_coeff(_tensor(Abar))), dt)
    u = grid.sample(instance.u0) if u0 is None else np.array(u0, dtype=float)
    diag = EnergyDiagnostics()
    diag.start(grid, u)
    # discrete Gronwall envelope e^{|alpha| t} (|u0| + sum dt |f|)
    forcing_int = 0.0
    u0_norm = norms(grid, u)[0]
    bound_margin = np.inf
    out = [u.copy()] if snap[0] == 0 else []
    want = set(snap.tolist())
    for k in range(total):
        t = k * dt
        f = instance.forcing(t, grid.points)
        rhs = u + dt * (reaction(u) * u + f)
        if not np.all(np.isfinite(rhs)):
            raise NumericalFailure(f"non-finite reaction or forcing at t = {t!r} (step {k + 1})")
        u_new = solver(rhs)
        if not np.all(np.isfinite(u_new)):
            raise NumericalFailure(f"non-finite state at t = {t + dt!r} (step {k + 1})")
        diag.update(grid, dt, u, u_new)
        forcing_int += dt * norms(grid, f)[0]
        envelope = np.exp(sup * (k + 1) * dt) * (u0_norm + forcing_int)
        bound_margin = min(bound_margin, (envelope - norms(grid, u_new)[0]) / max(1.0, envelope))
        u = u_new
        if k + 1 in want:
            out.append(u.copy())
    return AveragedTrajectory(dt, grid, snap, snap * dt, np.array(out), diag, bound_margin)


def gronwall_stability(instance, Abar, avg, dt, delta):
    """Worst-case amplification ``sup_t |u1 - u2| / |delta|`` of an
    initial perturbation ``delta``."""
    grid = avg.grid
    u0 = grid.sample(instance.u0)
    a = run_averaged(instance, Abar, avg, dt, snapshot_times="all", u0=u0)
    b = run_averaged(instance, Abar, avg, dt, snapshot_times="all", u0=u0 + delta)
    dnorm = norms(grid, delta)[0]
    diffs = np.array([norms(grid, x)[0] for x in a.u - b.u])
    if dnorm == 0:
        return 0.0 if np.all(diffs == 0) else np.inf
    return float(diffs.max() / dnorm)

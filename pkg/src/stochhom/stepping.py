"""Time grids, snapshot bookkeeping and running energy diagnostics."""
from dataclasses import dataclass

import numpy as np

from .mesh import norms

DEFAULT_SNAPSHOTS = 33


def step_count(T, dt):
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"horizon {T!r} is not a multiple of dt = {dt!r}")
    return steps


def snapshot_steps(T, dt, snapshot_times=None, count=DEFAULT_SNAPSHOTS):
    """Step indices of the requested snapshot times (all on the time grid)."""
    steps = step_count(T, dt)
    if snapshot_times is None:
        idx = np.unique(np.round(np.linspace(0, steps, count)).astype(int))
    elif isinstance(snapshot_times, str) and snapshot_times == "all":
        idx = np.arange(steps + 1)
    else:
        t = np.asarray(snapshot_times, dtype=float)
        idx = np.round(t / dt).astype(int)
        if np.any(np.abs(idx * dt - t) > 1e-9 * max(T, 1.0)) or np.any(idx < 0) or np.any(idx > steps):
            raise ValueError("snapshot times must lie on the time grid within [0, T]")
        idx = np.unique(idx)
    return steps, idx


@dataclass
class EnergyDiagnostics:
    """Running discrete versions of sup|u|^2, int |grad u|^2, int |du/dt|^2
    and sup|v|^2."""

    sup_u2: float = 0.0
    grad_int: float = 0.0
    dudt_int: float = 0.0
    sup_v2: float = 0.0
    energy_margin: float = np.inf

    def start(self, grid, u, v=None):
        self.sup_u2 = norms(grid, u)[0] ** 2
        if v is not None:
            self.sup_v2 = norms(grid, v)[0] ** 2

    def update(self, grid, dt, u_old, u_new, v_new=None):
        l2, h1, _ = norms(grid, u_new)
        self.sup_u2 = max(self.sup_u2, l2**2)
        self.grad_int += dt * h1**2
        self.dudt_int += dt * norms(grid, (u_new - u_old) / dt)[0] ** 2
        if v_new is not None:
            self.sup_v2 = max(self.sup_v2, norms(grid, v_new)[0] ** 2)

    def check_energy(self, grid, dt, m, alpha_sup, u_old, u_new, f_old):
        """Slack in |u'|^2 + 2 dt m |grad u'|^2 <= |u|^2 + 2 dt (|alpha| |u| |u'| + <f, u'>)."""
        l2_old = norms(grid, u_old)[0]
        l2_new, h1_new, _ = norms(grid, u_new)
        lhs = l2_new**2 + 2.0 * dt * m * h1_new**2
        rhs = l2_old**2 + 2.0 * dt * (alpha_sup * l2_old * l2_new + grid.inner(f_old, u_new))
        self.energy_margin = min(self.energy_margin, (rhs - lhs) / max(1.0, rhs))

    def as_dict(self):
        return {
            "energy_sup": self.sup_u2,
            "grad_energy_int": self.grad_int,
            "dudt_energy": self.dudt_int,
            "v_energy_sup": self.sup_v2,
        }

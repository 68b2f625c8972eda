"""Verification harness: epsilon-convergence of the fine solution to the
averaged one, the three-term reaction splitting, the time-averaging
estimate for the fast field, and the weak-form gap with oscillating test
functions.

Every routine here reports; none of them asserts.  All results are
deterministic functions of the instance (including its seed).
"""
from dataclasses import dataclass, field

import numpy as np

from .averaged import run_averaged
from .averaging import AveragedReaction, alpha_bar, alpha_bar_eps, alpha_eps, make_averaged_reaction
from .cell import corrector_field, effective_tensor, solve_cell
from .fast_ou import OUState, ou_step
from .fine import resolving_points, run_fine
from .mesh import assemble_diffusion, build_grid, constant_coeff, norms
from .rng import stream_key
from .stepping import snapshot_steps

DEFAULT_DT = 1.0 / 640.0
DEFAULT_CELL_RESOLUTION = 256
KHASMINSKII_DELTAS = (0.1, 0.2, 0.4, 0.8, 1.6)


@dataclass
class StudySetup:
    """Everything shared by the runs of one sweep: a grid resolving the
    smallest epsilon, the cell solution, the effective tensor and the
    averaged reaction on that grid."""

    instance: object
    grid: object
    dt: float
    cell: object
    Abar: object
    avg: AveragedReaction
    _averaged: dict = field(default_factory=dict, repr=False)
    _reactions: dict = field(default_factory=dict, repr=False)

    def averaged(self, snapshot_times=None):
        """Averaged trajectory on the shared grid (memoised per snapshot set)."""
        key = snapshot_times if snapshot_times is None or isinstance(snapshot_times, str) else tuple(snapshot_times)
        if key not in self._averaged:
            self._averaged[key] = run_averaged(self.instance, self.Abar, self.avg, self.dt, snapshot_times=snapshot_times)
        return self._averaged[key]

    def reference_reactions(self, eps):
        """Per step k, ``alphabar^eps(ubar_k)`` and ``alphabar(ubar_k)`` (memoised)."""
        ubar = self.averaged("all").u
        if "abar" not in self._reactions:
            self._reactions["abar"] = np.array([alpha_bar(self.avg, u) for u in ubar])
        key = ("abar_eps", float(eps))
        if key not in self._reactions:
            self._reactions[key] = np.array([alpha_bar_eps(self.avg, eps, u) for u in ubar])
        return self._reactions[key], self._reactions["abar"]


def prepare(instance, dt=DEFAULT_DT, n=None, cell_resolution=DEFAULT_CELL_RESOLUTION, order=20, eps_list=None):
    eps_list = tuple(instance.eps if eps_list is None else eps_list)
    n = resolving_points(min(eps_list)) if n is None else n
    grid = build_grid(instance.dim, n)
    cell = solve_cell(instance.A, cell_resolution)
    Abar = effective_tensor(instance.A, cell)
    avg = make_averaged_reaction(instance.alpha, grid, instance.noise, order)
    return StudySetup(instance, grid, dt, cell, Abar, avg)


def _check_decreasing(eps_list):
    eps = np.asarray(eps_list, dtype=float)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError(f"epsilon list must be positive and strictly decreasing, got {list(eps_list)}")
    return eps


# --- convergence ------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRecord:
    eps: float
    replica: int
    sup_l2_error: float
    final_l2_error: float
    diagnostics: dict


@dataclass
class ConvergenceReport:
    eps: np.ndarray
    records: list
    mean_error: np.ndarray
    stderr: np.ndarray
    exceedance: np.ndarray
    delta_tol: float
    ubar_sup: float
    observed_rate: float

    def errors(self, eps):
        return np.array([r.sup_l2_error for r in self.records if r.eps == eps])

    def diagnostic_table(self):
        """Per epsilon, the replica mean of every energy diagnostic."""
        keys = list(self.records[0].diagnostics) if self.records else []
        return {
            key: np.array([np.mean([r.diagnostics[key] for r in self.records if r.eps == e]) for e in self.eps])
            for key in keys
        }


def converge_study(
    instance,
    eps_list=None,
    replicas=None,
    dt=DEFAULT_DT,
    snapshot_times=None,
    delta_tol=None,
    n=None,
    cell_resolution=DEFAULT_CELL_RESOLUTION,
    setup=None,
):
    """Run the averaged solver once and the fine solver for every
    (epsilon, replica); report sup-over-snapshots and final L2 errors.

    ``delta_tol`` defaults to a tenth of the sup-over-snapshots norm of the
    averaged solution.
    """
    eps = _check_decreasing(instance.eps if eps_list is None else eps_list)
    replicas = instance.replicas if replicas is None else int(replicas)
    if replicas < 1:
        raise ValueError("need at least one replica")
    setup = setup or prepare(instance, dt, n, cell_resolution, eps_list=eps)
    grid = setup.grid
    ubar = setup.averaged(snapshot_times)
    ubar_sup = max(norms(grid, u)[0] for u in ubar.u)
    tol = 0.1 * ubar_sup if delta_tol is None else float(delta_tol)
    records = []
    for e in eps:
        for r in range(replicas):
            traj = run_fine(instance, float(e), setup.dt, grid.n, snapshot_times, replica=r)
            if not np.array_equal(traj.steps, ubar.steps):
                raise ValueError("snapshot mismatch between fine and averaged runs")
            err = [norms(grid, a - b)[0] for a, b in zip(traj.u, ubar.u)]
            records.append(ExperimentRecord(float(e), r, float(max(err)), float(err[-1]), traj.diagnostics.as_dict()))
    mean, se, exceed = [], [], []
    for e in eps:
        errs = np.array([rec.sup_l2_error for rec in records if rec.eps == e])
        mean.append(errs.mean())
        se.append(errs.std(ddof=1) / np.sqrt(len(errs)) if len(errs) > 1 else 0.0)
        exceed.append(np.mean(errs > tol))
    mean = np.array(mean)
    rate = loglog_slope(eps, mean) if len(eps) > 1 and np.all(mean > 0) else float("nan")
    return ConvergenceReport(eps, records, mean, np.array(se), np.array(exceed), tol, float(ubar_sup), rate)


# --- three-term splitting of the reaction -----------------------------------

def skewed_sine(x):
    """``prod_i sin(pi x_i) (1 + x_i)``: smooth, zero on the boundary, asymmetric."""
    return np.prod(np.sin(np.pi * x) * (1.0 + x), axis=1)


@dataclass(frozen=True)
class SDecomposition:
    eps: float
    replica: int
    S1: float
    S2: float
    S3: float


def s_decomposition(instance, eps, replica=0, phi=None, psi=None, setup=None, dt=DEFAULT_DT, n=None):
    """Integrate, over the whole time grid and the domain,

    * S1 = (alpha^eps(v) - alphabar^eps(u)) u phi psi
    * S2 = (alphabar^eps(u) u - alphabar^eps(ubar) ubar) phi psi
    * S3 = (alphabar^eps(ubar) - alphabar(ubar)) ubar phi psi

    with a right-endpoint rule at every step.  ``phi`` is a field on the
    shared grid and ``psi(t)`` a time profile (default 1).  The default
    ``phi`` is deliberately not mirror-symmetric about the centre: for a
    symmetric ``phi`` the cell-oscillation term S3 cancels identically.
    """
    setup = setup or prepare(instance, dt, n)
    grid, avg, dt = setup.grid, setup.avg, setup.dt
    phi = grid.sample(skewed_sine) if phi is None else np.asarray(phi, dtype=float)
    psi = psi or (lambda t: 1.0)
    ubar = setup.averaged("all")
    abar_eps_ub, abar_ub_all = setup.reference_reactions(eps)
    acc = np.zeros(3)

    def observer(k, t, u, v):
        ub = ubar.u[k]
        abar_u = alpha_bar_eps(avg, eps, u)
        abar_ub = abar_eps_ub[k]
        w = dt * psi(t)
        acc[0] += w * grid.inner((alpha_eps(avg.alpha, eps, grid, v) - abar_u) * u, phi)
        acc[1] += w * grid.inner(abar_u * u - abar_ub * ub, phi)
        acc[2] += w * grid.inner((abar_ub - abar_ub_all[k]) * ub, phi)

    run_fine(instance, eps, dt, grid.n, snapshot_times=[0.0], replica=replica, observer=observer)
    return SDecomposition(float(eps), int(replica), *map(float, acc))


# --- time averages of the fast field ----------------------------------------

@dataclass(frozen=True)
class KhasminskiiReport:
    delta: np.ndarray
    lhs: np.ndarray
    stderr: np.ndarray
    envelope: np.ndarray
    slope: float
    target: float


def loglog_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)[0])


def reaction_functional(alpha, grid, phi, eps_cell):
    """Row-wise ``Phi(w) = <alpha(x / eps_cell, w), phi>``."""

    def Phi(w):
        return grid.cell_volume * (alpha_eps(alpha, eps_cell, grid, w) @ phi)

    return Phi


def khasminskii_test(
    alpha,
    noise,
    xi,
    eta,
    phi,
    grid,
    delta_list=KHASMINSKII_DELTAS,
    samples=10_000,
    tau=0.02,
    eps_cell=0.1,
    substeps=None,
    seed=0,
    order=20,
):
    """Estimate ``E |1/delta int_0^delta Phi(v(s)) ds - int Phi dmu|`` for each
    delta, with ``v`` the fast field of time scale ``tau`` started at
    ``eta`` and relaxing towards the frozen ``xi``.

    ``Phi(w) = <alpha(x / eps_cell, w), phi>`` does not depend on time.  The
    invariant integral is evaluated by Gauss-Hermite quadrature, so the
    only Monte Carlo error is in the time average.  Paths are stepped
    exactly with ``substeps`` steps per tau (default 8) and integrated by
    the trapezoid rule; all deltas share one pass over the paths.
    """
    delta = np.asarray(delta_list, dtype=float)
    if np.any(delta <= 0) or np.any(np.diff(delta) <= 0):
        raise ValueError("deltas must be positive and increasing")
    spectral = noise.discretize(grid) if hasattr(noise, "discretize") else noise
    xi = np.asarray(xi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    Phi = reaction_functional(alpha, grid, phi, eps_cell)
    avg = AveragedReaction(alpha, grid, spectral.sigma2, order)
    target = grid.inner(alpha_bar_eps(avg, eps_cell, xi), phi)
    # substep: the largest divisor of delta[0] not exceeding tau / substeps
    h = delta[0] / np.ceil(delta[0] * (substeps or 8) / tau)
    marks = np.round(delta / h).astype(int)
    if np.any(np.abs(marks * h - delta) > 1e-9 * delta):
        raise ValueError("every delta must be a multiple of the substep")
    state = OUState(np.array(np.broadcast_to(np.asarray(eta, dtype=float), (samples, grid.size))), spectral, tau,
                    stream_key(seed, 4))
    prev = Phi(state.values)
    integral = np.zeros(samples)
    lhs, se = [], []
    want = dict(zip(marks.tolist(), range(len(delta))))
    for k in range(1, marks[-1] + 1):
        state = ou_step(state, xi, h)
        cur = Phi(state.values)
        integral += 0.5 * h * (prev + cur)
        prev = cur
        if k in want:
            dev = np.abs(integral / (k * h) - target)
            lhs.append(dev.mean())
            se.append(dev.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0)
    lhs = np.array(lhs)
    se = np.array(se)
    if np.all(lhs > 0) and len(delta) > 1:
        slope = loglog_slope(delta, lhs)
    else:
        slope = float("nan")
    envelope = lhs[0] * np.sqrt(delta[0] / delta)
    return KhasminskiiReport(delta, lhs, se, envelope, slope, float(target))


# --- weak-form gap with oscillating test functions ----------------------------

def _time_integral(times, values, psi):
    w = np.array([psi(t) for t in times]) * np.asarray(values)
    if len(times) < 2:
        return 0.0
    return float(np.trapezoid(w, times))


def oscillating_test_field(grid, cell, eps, phi, grad_phi):
    """``phi + eps grad(phi) . chi*(x / eps)`` at the grid nodes."""
    chi, _ = corrector_field(cell, eps, grid, adjoint=True)
    g = grad_phi(grid.points)  # (N, d)
    return phi + eps * np.sum(g.T * chi, axis=0)


def sine_square(x):
    return np.prod(np.sin(np.pi * x) ** 2, axis=1)


def sine_square_grad(x):
    s2 = np.sin(np.pi * x) ** 2
    ds = np.pi * np.sin(2.0 * np.pi * x)
    out = np.empty_like(x)
    for k in range(x.shape[1]):
        others = np.prod(np.delete(s2, k, axis=1), axis=1) if x.shape[1] > 1 else 1.0
        out[:, k] = ds[:, k] * others
    return out


def corrector_residual(instance, eps, fine_traj, averaged_traj, cell, Abar, phi=sine_square, grad_phi=sine_square_grad,
                       psi=None):
    """``| int int A^eps grad u^eps . grad phi^eps psi - int int Abar grad ubar . grad phi psi |``

    Both energy forms are the discrete ones of the assembled operators, so
    ``a(u, w) = -<L u, w>``; time integration uses the trapezoid rule over
    the stored snapshots of the two trajectories, which must coincide.
    """
    psi = psi or (lambda t: 1.0)
    grid = fine_traj.grid
    if not np.array_equal(fine_traj.steps, averaged_traj.steps) or averaged_traj.grid != grid:
        raise ValueError("snapshot mismatch between fine and averaged runs")
    phi_nodes = grid.sample(phi)
    phi_eps = oscillating_test_field(grid, cell, eps, phi_nodes, grad_phi)
    L_eps = assemble_diffusion(grid, instance.A.at_scale(eps)).matrix
    L_bar = assemble_diffusion(grid, constant_coeff(np.atleast_2d(getattr(Abar, "matrix", Abar)))).matrix
    fine_form = [-grid.inner(L_eps @ u, phi_eps) for u in fine_traj.u]
    bar_form = [-grid.inner(L_bar @ u, phi_nodes) for u in averaged_traj.u]
    return abs(_time_integral(fine_traj.times, fine_form, psi) - _time_integral(averaged_traj.times, bar_form, psi))


def corrector_study(instance, eps_list=None, replicas=1, setup=None, snapshot_times=None, **kw):
    """Weak-form gap for every (epsilon, replica); returns (eps, replica, gap) rows."""
    eps = _check_decreasing(instance.eps if eps_list is None else eps_list)
    setup = setup or prepare(instance, eps_list=eps, **kw)
    ubar = setup.averaged(snapshot_times)
    rows = []
    for e in eps:
        for r in range(replicas):
            traj = run_fine(instance, float(e), setup.dt, setup.grid.n, snapshot_times, replica=r)
            rows.append((float(e), r, corrector_residual(instance, float(e), traj, ubar, setup.cell, setup.Abar)))
    return rows


def snapshot_grid(T, dt, count):
    """Times of ``count`` evenly spread snapshots on the time grid."""
    _, idx = snapshot_steps(T, dt, None, count)
    return idx * dt

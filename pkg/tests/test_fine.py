import dataclasses

import numpy as np
import pytest

from stochhom.errors import NumericalFailure
from stochhom.fine import resolving_points, run_fine
from stochhom.mesh import build_grid, norms
from stochhom.problems import (
    NoiseSpec,
    ReactionCoefficient,
    builtin_library,
    constant_reaction,
    lookup,
    zero_forcing,
)


def heat_instance(T=0.1):
    inst = lookup("constant", alpha=constant_reaction(0.0), forcing=zero_forcing, T=T)
    return inst.with_noise(q0=0.0)


def zero_field(x):
    return np.zeros(len(x))


def test_heat_eigenfunction_exact_discrete_decay():
    n, dt, T = 31, 0.01, 0.1
    traj = run_fine(heat_instance(T), 0.5, dt, n, snapshot_times=[0.0, T])
    g = traj.grid
    lam = (2 - 2 * np.cos(np.pi * g.h)) / g.h**2
    s = np.sin(np.pi * g.axis_coords)
    np.testing.assert_allclose(traj.u[-1], (1 + dt * lam) ** -10 * s, rtol=1e-12)
    # and the continuous decay to scheme accuracy
    assert np.max(np.abs(traj.u[-1] - np.exp(-np.pi**2 * T) * s)) < 0.05


def test_zero_problem_stays_zero():
    inst = dataclasses.replace(heat_instance(), u0=zero_field, v0=zero_field)
    traj = run_fine(inst, 0.2, 0.01, 39, snapshot_times="all")
    assert np.all(traj.u == 0) and np.all(traj.v == 0)
    assert all(v == 0.0 for v in traj.diagnostics.as_dict().values())


def test_slow_fast_variable_is_frozen():
    inst = lookup("layered", T=0.1).with_noise(q0=0.0)
    traj = run_fine(inst, 100.0, 0.01, 31, snapshot_times=[0.0, 0.1])
    # v moves by at most (1 - e^{-T/eps}) |u - v0|_inf
    assert np.max(np.abs(traj.v[-1] - traj.v[0])) <= -np.expm1(-0.1 / 100.0) * 2.0


def test_deterministic_given_seed_and_replica():
    inst = lookup("layered", T=0.1)
    a = run_fine(inst, 0.1, 0.005, replica=2)
    b = run_fine(inst, 0.1, 0.005, replica=2)
    c = run_fine(inst, 0.1, 0.005, replica=3)
    assert a.diagnostics.as_dict() == b.diagnostics.as_dict()
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.v, b.v)
    assert not np.array_equal(a.v, c.v)


def test_resolution_rule():
    assert resolving_points(0.05) == 159
    with pytest.raises(ValueError, match="grid does not resolve epsilon"):
        run_fine(lookup("layered"), 0.05, 0.01, 63)


def test_reaction_step_margin():
    with pytest.raises(ValueError, match="exceeds"):
        run_fine(lookup("layered"), 0.2, 0.25)


def test_snapshots_on_time_grid():
    traj = run_fine(lookup("layered"), 0.2, 1 / 640)
    assert len(traj.times) == 33
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        run_fine(lookup("layered"), 0.2, 1 / 640, snapshot_times=[0.001])


def test_non_finite_reaction_reported():
    alpha = ReactionCoefficient("nan", lambda y, eta: np.where(eta > 0.5, np.nan, -1.0), 1.0, 1.0)
    with pytest.raises(NumericalFailure, match="step"):
        run_fine(lookup("layered", alpha=alpha, T=0.05), 0.2, 0.01)


@pytest.mark.parametrize("name", sorted(builtin_library(1)))
def test_energy_inequality_every_step(name):
    traj = run_fine(lookup(name, T=0.25), 0.1, 1 / 320)
    assert traj.diagnostics.energy_margin >= -1e-12
    assert all(np.isfinite(v) for v in traj.diagnostics.as_dict().values())


def test_energy_inequality_2d():
    traj = run_fine(lookup("isotropic", dim=2, T=0.05), 0.25, 0.01)
    assert traj.diagnostics.energy_margin >= -1e-12


def test_time_refinement_first_order():
    inst = lookup("layered").with_noise(q0=0.0)
    eps, n = 0.1, 79
    times = np.linspace(0, 0.5, 11)
    ref = run_fine(inst, eps, 1 / 2560, n, snapshot_times=times)
    g = build_grid(1, n)
    errs = []
    for dt in (1 / 80, 1 / 160, 1 / 320):
        traj = run_fine(inst, eps, dt, n, snapshot_times=times)
        errs.append(max(norms(g, a - b)[0] for a, b in zip(traj.u, ref.u)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 1.6) & (ratios < 2.6))


def test_fast_energy_bounded_across_eps():
    inst = lookup("layered")
    sups = []
    for eps in (0.2, 0.1, 0.05):
        vals = [run_fine(inst, eps, 1 / 320, 159, replica=r, check_energy=False).diagnostics.sup_v2
                for r in range(16)]
        sups.append(np.mean(vals))
    assert max(sups) / min(sups) < 2.0


def test_noise_modes_must_fit_grid():
    with pytest.raises(ValueError, match="noise modes"):
        run_fine(lookup("layered").with_noise(modes=64), 0.5, 0.01, 31)


def test_observer_sees_every_step():
    seen = []
    run_fine(lookup("layered", T=0.05), 0.2, 0.01, observer=lambda k, t, u, v: seen.append((k, t)))
    assert [k for k, _ in seen] == [1, 2, 3, 4, 5]
    assert seen[-1][1] == pytest.approx(0.05)
    assert NoiseSpec().q0 == 0.2

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochhom.averaging import (
    AveragedReaction,
    alpha_bar,
    alpha_bar_eps,
    alpha_bar_Y,
    alpha_eps,
    make_averaged_reaction,
)
from stochhom.fast_ou import FastProcess, InvariantMeasure, invariant_integral
from stochhom.mesh import build_grid
from stochhom.problems import (
    NoiseSpec,
    ReactionCoefficient,
    constant_reaction,
    dissipative_reaction,
    eta_only_reaction,
    separable_reaction,
)

TWO_PI = 2 * np.pi


def tanh_only():
    return ReactionCoefficient("tanh", lambda y, z: np.tanh(z) + 0 * y[..., 0], 1.0, 1.0, y_dependent=False)


def cell_sine():
    return ReactionCoefficient("cellsine", lambda y, z: np.sin(TWO_PI * y[..., 0]) + 0 * z, 1.0, 0.0,
                               eta_dependent=False)


@pytest.fixture
def grid():
    return build_grid(1, 31)


BUILTINS = [dissipative_reaction(), separable_reaction(), eta_only_reaction(), constant_reaction(-0.5)]


def test_alpha_eps_without_cell_dependence(grid):
    eta = np.linspace(-2, 2, grid.size)
    np.testing.assert_array_equal(alpha_eps(eta_only_reaction(), 0.1, grid, eta), -(1 + np.tanh(eta)))


def test_alpha_eps_period(grid):
    vals = alpha_eps(cell_sine(), 0.25, grid, np.zeros(grid.size))
    # h = 1/32, so a shift of 8 nodes is one period
    np.testing.assert_allclose(vals[8:], vals[:-8], atol=1e-12)


def test_alpha_eps_unit_scale(grid):
    eta = np.cos(grid.axis_coords)
    alpha = dissipative_reaction()
    np.testing.assert_array_equal(alpha_eps(alpha, 1.0, grid, eta), alpha(grid.points, eta))


def test_alpha_eps_batched(grid):
    eta = np.random.default_rng(0).standard_normal((5, grid.size))
    out = alpha_eps(dissipative_reaction(), 0.2, grid, eta)
    assert out.shape == (5, grid.size)
    np.testing.assert_array_equal(out[3], alpha_eps(dissipative_reaction(), 0.2, grid, eta[3]))


def test_cell_average_oracles():
    z = np.linspace(-3, 3, 13)
    assert np.max(np.abs(alpha_bar_Y(separable_reaction(), z))) < 1e-14
    np.testing.assert_array_equal(alpha_bar_Y(constant_reaction(-0.7), z), -0.7)
    weighted = ReactionCoefficient("w", lambda y, e: (1 + 0.5 * np.sin(TWO_PI * y[..., 0])) * np.tanh(e), 1.5, 1.5)
    np.testing.assert_allclose(alpha_bar_Y(weighted, z), np.tanh(z), atol=1e-14)
    np.testing.assert_allclose(alpha_bar_Y(dissipative_reaction(), z, dim=2), -(1 + np.tanh(z)), atol=1e-13)


def test_degenerate_measure(grid):
    avg = AveragedReaction(dissipative_reaction(), grid, np.zeros(grid.size))
    xi = np.sin(np.pi * grid.axis_coords)
    np.testing.assert_allclose(alpha_bar(avg, xi), alpha_bar_Y(dissipative_reaction(), xi), atol=1e-14)
    np.testing.assert_allclose(alpha_bar_eps(avg, 0.1, xi), dissipative_reaction()(grid.points / 0.1, xi), atol=1e-14)


def test_constant_reaction_average(grid):
    avg = make_averaged_reaction(constant_reaction(-2.0), grid, NoiseSpec(modes=8))
    np.testing.assert_allclose(alpha_bar(avg, np.ones(grid.size)), -2.0, rtol=1e-14)


def test_gaussian_expectation_oracle(grid):
    avg = AveragedReaction(tanh_only(), grid, np.full(grid.size, 0.25))
    rng = np.random.default_rng(2024)
    mc = np.tanh(rng.normal(0.5, 0.5, 1_000_000)).mean()
    assert alpha_bar(avg, np.full(grid.size, 0.5))[0] == pytest.approx(mc, abs=1e-3)


def test_bar_eps_equals_bar_without_cell_dependence(grid):
    avg = make_averaged_reaction(eta_only_reaction(), grid, NoiseSpec(modes=8))
    xi = np.sin(np.pi * grid.axis_coords)
    np.testing.assert_array_equal(alpha_bar_eps(avg, 0.1, xi), alpha_bar(avg, xi))


def test_separable_factorisation(grid):
    avg = make_averaged_reaction(separable_reaction(), grid, NoiseSpec(modes=8))
    xi = 2 * np.sin(np.pi * grid.axis_coords) - 0.5
    eps = 0.125
    factor = np.sin(TWO_PI * grid.axis_coords / eps)
    t, w = np.polynomial.hermite.hermgauss(60)
    g = np.array([np.sum(w * np.tanh(x + np.sqrt(2 * s) * t)) / np.sqrt(np.pi) for x, s in zip(xi, avg.sigma2)])
    np.testing.assert_allclose(alpha_bar_eps(avg, eps, xi), factor * g, atol=1e-9)


def test_cached_matches_direct(grid):
    avg = make_averaged_reaction(dissipative_reaction(), grid, NoiseSpec())
    xi = np.linspace(-3, 3, grid.size)
    np.testing.assert_allclose(alpha_bar(avg, xi, cached=True), alpha_bar(avg, xi), atol=1e-9)
    far = np.full(grid.size, 10 * avg.radius)
    np.testing.assert_allclose(alpha_bar(avg, far, cached=True), alpha_bar(avg, far), atol=1e-14)


@pytest.mark.parametrize("alpha", BUILTINS, ids=lambda a: a.name)
def test_order_convergence(grid, alpha):
    xi = 1.5 * np.sin(np.pi * grid.axis_coords)
    a20 = make_averaged_reaction(alpha, grid, NoiseSpec(), order=20)
    a40 = make_averaged_reaction(alpha, grid, NoiseSpec(), order=40)
    assert np.max(np.abs(alpha_bar(a20, xi) - alpha_bar(a40, xi))) <= 1e-8
    assert np.max(np.abs(alpha_bar_eps(a20, 0.1, xi) - alpha_bar_eps(a40, 0.1, xi))) <= 1e-8


@pytest.mark.parametrize("alpha", BUILTINS, ids=lambda a: a.name)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_boundedness(alpha, seed, eps):
    grid = build_grid(1, 31)
    avg = make_averaged_reaction(alpha, grid, NoiseSpec())
    xi = 5 * np.random.default_rng(seed).standard_normal(grid.size)
    for out in (alpha_bar(avg, xi), alpha_bar_eps(avg, eps, xi), alpha_bar(avg, xi, cached=True)):
        assert np.max(np.abs(out)) <= alpha.sup * (1 + 1e-12)


@pytest.mark.parametrize("alpha", BUILTINS, ids=lambda a: a.name)
def test_lipschitz_transfer(grid, alpha):
    avg = make_averaged_reaction(alpha, grid, NoiseSpec())
    rng = np.random.default_rng(11)
    for _ in range(50):
        x1, x2 = 2 * rng.standard_normal((2, grid.size))
        bound = alpha.lip * np.max(np.abs(x1 - x2)) * (1 + 1e-9) + 1e-13
        assert np.max(np.abs(alpha_bar(avg, x1) - alpha_bar(avg, x2))) <= bound
        assert np.max(np.abs(alpha_bar_eps(avg, 0.1, x1) - alpha_bar_eps(avg, 0.1, x2))) <= bound


@pytest.mark.parametrize("eps", [0.25, 0.1])
def test_pointwise_marginal_reduction(eps):
    """The field-space integral equals the pointwise Gauss-Hermite one."""
    grid = build_grid(1, 39)
    noise = NoiseSpec(modes=12, q0=1.0).discretize(grid)
    alpha = dissipative_reaction()
    phi = np.sin(np.pi * grid.axis_coords) * (1 + grid.axis_coords)
    xi = 0.5 * np.cos(np.pi * grid.axis_coords)
    proc = FastProcess(grid, noise)
    Phi = lambda z: grid.cell_volume * (alpha_eps(alpha, eps, grid, z) @ phi)  # noqa: E731
    est = invariant_integral(proc, Phi, InvariantMeasure(xi, noise), 40000, seed=8)
    exact = grid.inner(alpha_bar_eps(AveragedReaction(alpha, grid, noise.sigma2), eps, xi), phi)
    assert abs(est.mean - exact) <= 3 * est.stderr

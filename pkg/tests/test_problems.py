import dataclasses

import numpy as np
import pytest

from stochhom.errors import AssumptionViolation
from stochhom.mesh import build_grid
from stochhom.problems import (
    CellMatrix,
    NoiseSpec,
    ReactionCoefficient,
    builtin_library,
    constant_matrix,
    constant_reaction,
    lookup,
    sine_basis,
    validate,
)


def test_identity_zero_reaction_passes():
    inst = dataclasses.replace(lookup("constant"), alpha=constant_reaction(0.0))
    rep = validate(inst)
    assert rep.m == rep.M == 1.0
    assert rep.m_sampled == rep.M_sampled == 1.0
    assert rep.alpha_sup_sampled == 0.0


def test_negative_eigenvalue_fails_ellipticity():
    bad = CellMatrix("bad", 1, lambda y: (np.cos(2 * np.pi * y[:, 0]))[:, None, None], 0.1, 1.0)
    with pytest.raises(AssumptionViolation) as info:
        validate(dataclasses.replace(lookup("constant"), A=bad))
    assert info.value.kind == "ellipticity"
    assert info.value.witness is not None


def test_asymmetric_matrix_fails():
    def func(y):
        out = np.tile(np.eye(2), (len(y), 1, 1))
        out[:, 0, 1] = 0.1
        return out

    with pytest.raises(AssumptionViolation, match="symmetry"):
        validate(dataclasses.replace(lookup("constant", dim=2), A=CellMatrix("asym", 2, func, 0.5, 2.0)))


def test_non_periodic_matrix_fails():
    bad = CellMatrix("drift", 1, lambda y: (1.0 + 0.1 * y[:, 0])[:, None, None], 1.0, 1.2)
    # the evaluator reduces mod 1, so periodicity is checked on the raw function
    with pytest.raises(AssumptionViolation, match="periodicity"):
        validate(dataclasses.replace(lookup("constant"), A=bad))


def test_unbounded_reaction_fails_boundedness():
    alpha = ReactionCoefficient("linear", lambda y, eta: eta + 0 * y[..., 0], sup=10.0, lip=1.0)
    with pytest.raises(AssumptionViolation) as info:
        validate(dataclasses.replace(lookup("constant"), alpha=alpha))
    assert info.value.kind == "boundedness"


def test_lipschitz_violation():
    alpha = ReactionCoefficient("steep", lambda y, eta: np.tanh(5 * eta) + 0 * y[..., 0], sup=1.0, lip=1.0)
    with pytest.raises(AssumptionViolation, match="lipschitz"):
        validate(dataclasses.replace(lookup("constant"), alpha=alpha))


def test_bad_horizon_and_eps():
    with pytest.raises(AssumptionViolation, match="horizon"):
        validate(lookup("layered", T=0.0))
    with pytest.raises(AssumptionViolation, match="epsilon"):
        validate(lookup("layered", eps=(0.1, -0.1)))


@pytest.mark.parametrize("dim", [1, 2])
def test_every_builtin_validates(dim):
    lib = builtin_library(dim)
    for name, inst in lib.items():
        rep = validate(inst)
        assert rep.M_sampled <= inst.A.M * (1 + 1e-12)
        assert rep.alpha_sup_sampled <= inst.alpha.sup * (1 + 1e-12)
        assert rep.trace_q == pytest.approx(inst.noise.trace(dim))


def test_library_contents_and_sign_convention():
    lib = builtin_library(1)
    assert {"constant", "layered", "isotropic", "separable", "eta_only"} <= set(lib)
    flags = {name: validate(inst).dissipative for name, inst in lib.items()}
    # the sign-changing separable reaction is kept but flagged
    assert flags.pop("separable") is False
    assert all(flags.values())


def test_lookup_layered_and_constant():
    layered = lookup("layered")
    assert layered.A.name == "layered"
    y = np.array([[0.25], [0.75]])
    np.testing.assert_allclose(layered.A(y)[:, 0, 0], [1 / 3, 1.0])
    np.testing.assert_array_equal(lookup("constant", dim=2).A(np.zeros((1, 2)))[0], np.eye(2))


def test_lookup_unknown():
    with pytest.raises(KeyError, match="unknown instance"):
        lookup("nope")


def test_layered_report_values():
    rep = validate(lookup("layered"))
    assert rep.m == pytest.approx(1 / 3) and rep.M == 1.0
    assert any(line.startswith("m = 0.333") for line in rep.lines())


def test_matrix_evaluation_is_periodic():
    A = lookup("isotropic", dim=2).A
    y = np.random.default_rng(0).uniform(0, 1, (20, 2))
    np.testing.assert_allclose(A(y), A(y + np.array([1.0, -3.0])), rtol=1e-12)


def test_noise_variances_and_sigma2():
    spec = NoiseSpec(modes=4, q0=2.0)
    np.testing.assert_allclose(spec.variances(1), 2.0 / np.arange(1, 5) ** 2)
    assert spec.variances(2).shape == (16,)
    g = build_grid(1, 9)
    noise = spec.discretize(g)
    assert np.all(noise.sigma2 >= 0)
    np.testing.assert_allclose(noise.sigma2_full_q, 2 * noise.sigma2)


def test_explicit_variances():
    spec = NoiseSpec(modes=3, q=(1.0, 0.0, 0.5))
    np.testing.assert_array_equal(spec.variances(1), [1.0, 0.0, 0.5])
    with pytest.raises(ValueError):
        NoiseSpec(modes=2, q=(1.0,)).variances(1)


def test_sine_basis_orthonormal():
    for d, n in ((1, 20), (2, 12)):
        g = build_grid(d, n)
        B = sine_basis(g, 5)
        np.testing.assert_allclose(g.cell_volume * B @ B.T, np.eye(5**d), atol=1e-12)
    with pytest.raises(ValueError):
        sine_basis(build_grid(1, 4), 5)


def test_constant_matrix_params():
    A = constant_matrix(2, 3.0)
    assert A.m == A.M == 3.0
    np.testing.assert_array_equal(A(np.zeros((1, 2)))[0], 3.0 * np.eye(2))

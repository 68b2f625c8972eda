"""Problem ingredients: the cell matrix A(y), the reaction coefficient
alpha(y, eta), the trace-class noise covariance, forcing and initial data,
plus sampled validation of the standing assumptions."""
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import AssumptionViolation

TWO_PI = 2.0 * np.pi
_REL = 1e-12


@dataclass(frozen=True)
class CellMatrix:
    """Y-periodic symmetric matrix field with ellipticity bounds m, M."""

    name: str
    dim: int
    func: Callable = field(repr=False, compare=False)
    m: float
    M: float
    params: tuple = ()

    def __call__(self, y):
        """Matrices at cell points ``y`` (shape (P, d)); evaluation is mod 1."""
        y = np.mod(np.asarray(y, dtype=float).reshape(-1, self.dim), 1.0)
        return np.asarray(self.func(y), dtype=float).reshape(-1, self.dim, self.dim)

    def transpose(self):
        return CellMatrix(self.name + "*", self.dim, lambda y: np.swapaxes(self.func(y), -1, -2), self.m, self.M, self.params)

    def at_scale(self, eps):
        """Sampler ``x -> A(x / eps)`` for the diffusion assembly."""
        return lambda x: self(np.asarray(x) / eps)


@dataclass(frozen=True)
class ReactionCoefficient:
    """alpha(y, eta): bounded by ``sup`` and ``lip``-Lipschitz in eta."""

    name: str
    func: Callable = field(repr=False, compare=False)
    sup: float
    lip: float
    params: tuple = ()
    y_dependent: bool = True
    eta_dependent: bool = True

    def __call__(self, y, eta):
        """``y`` has shape (..., d) and broadcasts against ``eta`` (...)."""
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        return np.asarray(self.func(y, np.asarray(eta, dtype=float)), dtype=float)


@dataclass(frozen=True)
class NoiseSpec:
    """Covariance diagonal in the Dirichlet sine basis of (0, 1)^d.

    Default variances are ``q0 * k^-2`` in 1D and ``q0 * (k1 k2)^-2`` in 2D
    on ``modes`` modes per axis; ``q`` overrides them with explicit values.
    """

    modes: int = 16
    q0: float = 0.2
    q: tuple | None = None

    def variances(self, dim):
        if self.q is not None:
            q = np.asarray(self.q, dtype=float)
            if q.shape != (self.modes,) * dim:
                raise ValueError(f"explicit variances must have shape {(self.modes,) * dim}, got {q.shape}")
            return q.ravel()
        k = np.arange(1, self.modes + 1, dtype=float)
        per_axis = k**-2
        q = per_axis
        for _ in range(dim - 1):
            q = np.multiply.outer(q, per_axis)
        return (self.q0 * q).ravel()

    def trace(self, dim):
        return float(np.sum(self.variances(dim)))

    def discretize(self, grid):
        return SpectralNoise.from_spec(self, grid)


def sine_basis(grid, modes):
    """Rows ``e_k(x_i)`` of the L2-orthonormal Dirichlet sine basis."""
    if modes > grid.n:
        raise ValueError(f"{modes} noise modes cannot be resolved by {grid.n} points per axis")
    k = np.arange(1, modes + 1)
    axis = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, grid.axis_coords))  # (K, n)
    if grid.d == 1:
        return axis
    return np.einsum("ai,bj->abij", axis, axis).reshape(modes**2, grid.size)


@dataclass(frozen=True)
class SpectralNoise:
    """Grid realization of a NoiseSpec: per-mode variances and basis rows."""

    q: np.ndarray
    basis: np.ndarray

    @classmethod
    def from_spec(cls, spec, grid):
        return cls(spec.variances(grid.d), sine_basis(grid, spec.modes))

    @property
    def trace(self):
        return float(np.sum(self.q))

    @property
    def sigma2(self):
        """Pointwise stationary variance ``1/2 sum_k q_k e_k(x)^2``."""
        return 0.5 * (self.q @ self.basis**2)

    @property
    def sigma2_full_q(self):
        """Same with covariance Q instead of Q/2, reported for comparison."""
        return self.q @ self.basis**2

    @classmethod
    def zero(cls, grid, modes=1):
        return cls(np.zeros(modes**grid.d), sine_basis(grid, modes))


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    dim: int
    A: CellMatrix
    alpha: ReactionCoefficient
    noise: NoiseSpec
    forcing: Callable = field(repr=False, compare=False)
    u0: Callable = field(repr=False, compare=False)
    v0: Callable = field(repr=False, compare=False)
    T: float = 0.5
    eps: tuple = (0.2, 0.1, 0.05)
    replicas: int = 16
    seed: int = 20240611

    def with_noise(self, **kw):
        return replace(self, noise=replace(self.noise, **kw))


# --- built-in ingredients -------------------------------------------------

def _iso(scalar, dim):
    def func(y):
        s = scalar(y)
        return s[:, None, None] * np.eye(dim)

    return func


def constant_matrix(dim, c=1.0):
    return CellMatrix("constant", dim, _iso(lambda y: np.full(len(y), c), dim), c, c, (("c", c),))


def layered_matrix(dim):
    """A(y) = a(y_1) I with a(s) = 1 / (2 + sin 2 pi s)."""
    return CellMatrix("layered", dim, _iso(lambda y: 1.0 / (2.0 + np.sin(TWO_PI * y[:, 0])), dim), 1.0 / 3.0, 1.0)


def isotropic_matrix(dim):
    """A(y) = prod_i (2 + cos 2 pi y_i) / 3 * I."""

    def scalar(y):
        return np.prod((2.0 + np.cos(TWO_PI * y)) / 3.0, axis=1)

    return CellMatrix("isotropic", dim, _iso(scalar, dim), 3.0**-dim, 1.0)


def dissipative_reaction():
    """alpha = -(1 + sin(2 pi y_1) / 2) (1 + tanh eta), values in [-3, 0]."""
    return ReactionCoefficient(
        "dissipative",
        lambda y, eta: -(1.0 + 0.5 * np.sin(TWO_PI * y[..., 0])) * (1.0 + np.tanh(eta)),
        sup=3.0,
        lip=1.5,
    )


def separable_reaction():
    """alpha = sin(2 pi y_1) tanh(eta); changes sign."""
    return ReactionCoefficient("separable", lambda y, eta: np.sin(TWO_PI * y[..., 0]) * np.tanh(eta), sup=1.0, lip=1.0)


def eta_only_reaction():
    """alpha = -(1 + tanh eta), no cell dependence."""
    return ReactionCoefficient(
        "eta_only", lambda y, eta: -(1.0 + np.tanh(eta)) + 0.0 * y[..., 0], sup=2.0, lip=1.0, y_dependent=False
    )


def constant_reaction(c=-1.0):
    return ReactionCoefficient(
        "constant",
        lambda y, eta: np.full(np.broadcast_shapes(np.shape(y)[:-1], np.shape(eta)), c),
        sup=abs(c),
        lip=0.0,
        params=(("c", c),),
        y_dependent=False,
        eta_dependent=False,
    )


def sine_product(x):
    return np.prod(np.sin(np.pi * x), axis=1)


def unit_forcing(t, x):
    return np.ones(len(x))


def zero_forcing(t, x):
    return np.zeros(len(x))


_MATRICES = {
    "constant": constant_matrix,
    "layered": layered_matrix,
    "isotropic": isotropic_matrix,
}

_REACTIONS = {
    "constant": constant_reaction,
    "dissipative": dissipative_reaction,
    "separable": separable_reaction,
    "eta_only": eta_only_reaction,
}

_LIBRARY = {
    # name: (matrix, reaction)
    "constant": ("constant", "constant"),
    "layered": ("layered", "dissipative"),
    "isotropic": ("isotropic", "dissipative"),
    "separable": ("layered", "separable"),
    "eta_only": ("layered", "eta_only"),
}


def builtin_library(dim=1):
    """All built-in instances for dimension ``dim``, keyed by name."""
    out = {}
    for name, (mat, react) in _LIBRARY.items():
        out[name] = ProblemInstance(
            name=name,
            dim=dim,
            A=_MATRICES[mat](dim),
            alpha=_REACTIONS[react](),
            noise=NoiseSpec(),
            forcing=unit_forcing,
            u0=sine_product,
            v0=sine_product,
        )
    return out


def lookup(name, dim=1, **overrides):
    lib = builtin_library(dim)
    if name not in lib:
        raise KeyError(f"unknown instance {name!r}; known: {', '.join(sorted(lib))}")
    return replace(lib[name], **overrides)


def matrix_by_name(name, dim):
    if name not in _MATRICES:
        raise KeyError(f"unknown cell matrix {name!r}")
    return _MATRICES[name](dim)


def reaction_by_name(name):
    if name not in _REACTIONS:
        raise KeyError(f"unknown reaction {name!r}")
    return _REACTIONS[name]()


# --- validation -----------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    instance: str
    m: float
    M: float
    m_sampled: float
    M_sampled: float
    alpha_sup: float
    alpha_lip: float
    alpha_sup_sampled: float
    alpha_lip_sampled: float
    trace_q: float
    dissipative: bool

    def lines(self):
        flag = "" if self.dissipative else "  (flagged: alpha takes positive values)"
        return [
            f"instance = {self.instance}",
            f"m = {self.m!r}",
            f"M = {self.M!r}",
            f"sampled eigenvalue range = [{self.m_sampled!r}, {self.M_sampled!r}]",
            f"alpha sup bound = {self.alpha_sup!r} (sampled {self.alpha_sup_sampled!r})",
            f"alpha Lipschitz constant = {self.alpha_lip!r} (sampled {self.alpha_lip_sampled!r})",
            f"trace Q = {self.trace_q!r}",
            f"dissipative = {self.dissipative}{flag}",
        ]


def cell_lattice(dim, per_axis=64):
    s = np.arange(per_axis) / per_axis
    mesh = np.meshgrid(*([s] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def check_cell_matrix(A, per_axis=64):
    """Return the sampled eigenvalue range; raise on any violation."""
    y = cell_lattice(A.dim, per_axis)
    raw = np.asarray(A.func(y), dtype=float).reshape(-1, A.dim, A.dim)
    asym = np.max(np.abs(raw - np.swapaxes(raw, -1, -2)), axis=(-1, -2))
    if np.any(asym > _REL * max(1.0, np.abs(raw).max())):
        i = int(np.argmax(asym))
        raise AssumptionViolation("symmetry", f"A(y) is not symmetric at y = {y[i]}", y[i])
    for axis in range(A.dim):
        shifted = np.asarray(A.func(y + np.eye(A.dim)[axis]), dtype=float).reshape(raw.shape)
        if not np.allclose(shifted, raw, rtol=1e-10, atol=1e-12):
            i = int(np.argmax(np.abs(shifted - raw).max(axis=(-1, -2))))
            raise AssumptionViolation("periodicity", f"A(y) != A(y + e_{axis + 1}) at y = {y[i]}", y[i])
    eig = np.linalg.eigvalsh(raw)
    lo, hi = eig[:, 0], eig[:, -1]
    if np.any(lo <= 0) or np.any(lo < A.m * (1 - _REL) - _REL):
        i = int(np.argmin(lo))
        raise AssumptionViolation(
            "ellipticity", f"smallest eigenvalue {lo[i]!r} below m = {A.m!r} at y = {y[i]}", y[i]
        )
    if np.any(hi > A.M * (1 + _REL) + _REL):
        i = int(np.argmax(hi))
        raise AssumptionViolation("ellipticity", f"largest eigenvalue {hi[i]!r} above M = {A.M!r} at y = {y[i]}", y[i])
    return float(lo.min()), float(hi.max())


def check_reaction(alpha, dim, per_axis=64):
    """Return (sampled sup, sampled Lipschitz ratio, dissipative flag)."""
    if not np.isfinite(alpha.sup) or not np.isfinite(alpha.lip):
        raise AssumptionViolation("boundedness", "declared bounds must be finite")
    y = cell_lattice(dim, per_axis)
    wide = np.linspace(-50.0, 50.0, 201)
    dense = np.linspace(-5.0, 5.0, 1001)
    sup_seen = 0.0
    lip_seen = 0.0
    positive = False
    for etas in (wide, dense):
        vals = alpha(y[:, None, :], etas[None, :])
        vals = np.broadcast_to(vals, (len(y), len(etas)))
        if not np.all(np.isfinite(vals)):
            raise AssumptionViolation("boundedness", "alpha returned non-finite values")
        absmax = np.abs(vals)
        i, j = np.unravel_index(np.argmax(absmax), absmax.shape)
        sup_seen = max(sup_seen, float(absmax[i, j]))
        if absmax[i, j] > alpha.sup * (1 + _REL) + _REL:
            raise AssumptionViolation(
                "boundedness",
                f"|alpha| = {absmax[i, j]!r} exceeds {alpha.sup!r} at y = {y[i]}, eta = {etas[j]!r}",
                (y[i], etas[j]),
            )
        ratio = np.abs(np.diff(vals, axis=1)) / np.diff(etas)[None, :]
        i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
        lip_seen = max(lip_seen, float(ratio[i, j]))
        if ratio[i, j] > alpha.lip * (1 + 1e-9) + _REL:
            raise AssumptionViolation(
                "lipschitz",
                f"difference quotient {ratio[i, j]!r} exceeds {alpha.lip!r} at y = {y[i]}, eta in "
                f"[{etas[j]!r}, {etas[j + 1]!r}]",
                (y[i], etas[j], etas[j + 1]),
            )
        positive = positive or bool(np.any(vals > 0))
    return sup_seen, lip_seen, not positive


def validate(instance, grid_points=31):
    """Sample the standing assumptions; raise AssumptionViolation on failure."""
    from .mesh import Grid

    if not instance.T > 0:
        raise AssumptionViolation("horizon", f"T must be positive, got {instance.T!r}")
    if len(instance.eps) == 0 or any(not e > 0 for e in instance.eps):
        raise AssumptionViolation("epsilon", f"all epsilon must be positive, got {instance.eps!r}")
    m_s, M_s = check_cell_matrix(instance.A)
    sup_s, lip_s, dissipative = check_reaction(instance.alpha, instance.dim)
    q = instance.noise.variances(instance.dim)
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise AssumptionViolation("trace", "noise variances must be finite and nonnegative")
    grid = Grid(instance.dim, max(grid_points, instance.noise.modes))
    for label, func in (("u0", instance.u0), ("v0", instance.v0)):
        if not np.all(np.isfinite(grid.sample(func))):
            raise AssumptionViolation("initial data", f"{label} is not finite on the grid")
    return ValidationReport(
        instance=instance.name,
        m=instance.A.m,
        M=instance.A.M,
        m_sampled=m_s,
        M_sampled=M_s,
        alpha_sup=instance.alpha.sup,
        alpha_lip=instance.alpha.lip,
        alpha_sup_sampled=sup_s,
        alpha_lip_sampled=lip_s,
        trace_q=float(np.sum(q)),
        dissipative=dissipative,
    )

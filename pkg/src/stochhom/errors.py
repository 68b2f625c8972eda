"""Exception types shared across the package."""


class AssumptionViolation(ValueError):
    """A sampled check of a standing assumption failed.

    ``kind`` names the violated property (``"ellipticity"``,
    ``"boundedness"``, ...) and ``witness`` holds the offending sample.
    """

    def __init__(self, kind, message, witness=None):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.witness = witness


class SolverError(RuntimeError):
    """A linear solve did not reach its residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalFailure(RuntimeError):
    """Non-finite values appeared during time stepping."""

"""Exception types shared across the package."""


class LfgsError(Exception):
    """Base class for all package errors."""


class NotOnManifold(LfgsError, ValueError):
    """Matrix columns are not orthonormal within the manifold tolerance."""

    def __init__(self, defect, tol):
        super().__init__(f"orthonormality defect {defect:.3e} exceeds {tol:.1e}")
        self.defect = defect
        self.tol = tol


class RankDeficient(LfgsError, ValueError):
    """Smallest singular value at or below the rank tolerance."""

    def __init__(self, sigma_min, tol):
        super().__init__(f"smallest singular value {sigma_min:.3e} <= {tol:.3e}")
        self.sigma_min = sigma_min
        self.tol = tol


class NotConverged(LfgsError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class TooFarApart(LfgsError, ValueError):
    """Endpoints violate the separation guard of a two-point solver."""

    def __init__(self, measured, limit, what="chordal gap"):
        super().__init__(f"{what} {measured:.6g} exceeds guard {limit:.6g}")
        self.measured = measured
        self.limit = limit


class IllPosed(LfgsError, RuntimeError):
    """A leapfrog subproblem left the region where its midpoint is unique."""

    def __init__(self, message, sweep=None, index=None, trace=None):
        super().__init__(message)
        self.sweep = sweep
        self.index = index
        self.trace = trace


class SingularDiagonal(LfgsError, ArithmeticError):
    """Block diagonal of a Gauss-Seidel splitting is singular."""

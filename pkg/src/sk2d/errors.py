"""Exception hierarchy shared by all sk2d modules."""


class SK2DError(Exception):
    """Base class for every error raised by sk2d."""


class DimensionError(SK2DError, ValueError):
    """Grid too small, or fields living on different grids."""


class DomainError(SK2DError, ValueError):
    """Input outside the domain where an operation is defined."""


class ContourError(SK2DError):
    """Contour quadrature failed, e.g. the integrand nearly vanishes on the loop."""


class SolverError(SK2DError):
    """A linear or nonlinear solve could not be carried out."""


class IntegrationError(SK2DError):
    """ODE step size underflow."""


class AccuracyError(SK2DError):
    """A result violated a built-in consistency check (e.g. determinant drift)."""


class FitError(SK2DError):
    """Regression problem is ill-posed or ill-conditioned."""


class ConstructionError(SK2DError):
    """A global construction (e.g. on the projective line) did not converge."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report

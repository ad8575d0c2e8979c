"""Exception types raised across the package."""


class BdreconError(Exception):
    """Base class for all package errors."""


class ValidationError(BdreconError, ValueError):
    """Invalid configuration or input outside the admissible range."""


class UndefinedGradient(BdreconError):
    """Graph gradient requested at a point where it does not exist."""


class QuadratureFailure(BdreconError):
    """Integrand oracle failed on a set of positive measure."""


class BudgetExceeded(BdreconError):
    """Evaluation budget exhausted before the requested accuracy."""


class OutOfChart(BdreconError):
    """Probe support leaves the coordinate chart of the patch."""


class ChartOverflow(BdreconError):
    """Field support does not fit inside the periodic pairing square."""


class NotAdmissible(BdreconError):
    """Boundary point failed the Lebesgue-defect certificate."""


class ConvexityViolation(BdreconError, ValueError):
    """Lame pair violates mu > 0 and 3 lambda + 2 mu > 0."""


class InversionInfeasible(BdreconError):
    """Impedance matrix is not consistent with a strongly convex Lame pair."""


class FactorizationFailure(BdreconError):
    """Covariance matrix is too indefinite to factor."""


class InsufficientTrials(BdreconError):
    """Too few Monte Carlo trials for a calibration split."""


class DegenerateFit(BdreconError):
    """Log-log fit explains too little of the variance."""

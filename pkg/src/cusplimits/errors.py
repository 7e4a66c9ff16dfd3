"""Exception types raised across the package."""


class CuspLimitsError(Exception):
    """Base class for all package errors."""


class ConfigError(CuspLimitsError, ValueError):
    """Invalid parameters or run configuration."""


class NumericalError(CuspLimitsError, ArithmeticError):
    """A numeric routine could not produce a trustworthy result."""


class CirculantNotPSD(NumericalError):
    pass


class CovarianceNotPD(NumericalError):
    pass


class SingularPoint(NumericalError, ValueError):
    """Cusp function evaluated at its unbounded centre."""


class SingularHit(NumericalError):
    """A quadrature node of a stochastic integral landed on a singularity."""


class NonPositive(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class TooFewSamples(CuspLimitsError, ValueError):
    pass


class ReplicateError(NumericalError):
    """Wraps a failure inside one Monte Carlo replicate."""

    def __init__(self, index, cause):
        super().__init__(f"replicate {index}: {cause}")
        self.index = index
        self.cause = cause

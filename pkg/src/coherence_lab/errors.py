"""Exception types shared across the lab."""


class CoherenceLabError(Exception):
    """Base class for all errors raised by this package."""


class NotHyperbolic(CoherenceLabError):
    """Integer matrix is not a hyperbolic element of SL(2,Z) with positive eigenvalues."""


class ConditionViolated(CoherenceLabError):
    """A construction parameter breaks one of the required inequalities."""


class GeometryInfeasible(CoherenceLabError):
    """Affine pieces of a piecewise circle map cannot be joined monotonically."""


class NoConvergence(CoherenceLabError):
    """Root finding failed to reach the requested tolerance."""


class SampleDegenerate(CoherenceLabError):
    """Empirical comparison ratios are non-finite or collapse to zero."""


class TooCloseToSingularity(CoherenceLabError):
    """Series evaluation requested inside the exclusion band of its blow-up point."""


class NoDecay(CoherenceLabError):
    """Series terms failed to enter a geometric decay regime within the budget."""


class HorizonTooShort(CoherenceLabError):
    """Splitting certification failed at this horizon but margins still improve with N."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CertificationFailed(CoherenceLabError):
    """Splitting certification failed and raising the horizon does not help."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConditionFails(CoherenceLabError):
    """Positivity bound stays negative for every admissible truncation order."""

    def __init__(self, message, limit=None):
        super().__init__(message)
        self.limit = limit


class InconsistentSigns(CoherenceLabError):
    """Sampled derivative signs are not uniform on a component."""

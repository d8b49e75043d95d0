"""Exception hierarchy shared by all blowlab modules."""


class BlowlabError(Exception):
    """Base class for every error raised by the package."""


class ParameterDomainError(BlowlabError, ValueError):
    """A model or numerical parameter violates a documented inequality."""


class SingularDomainError(BlowlabError, ValueError):
    """A closed-form profile was evaluated where its denominator vanishes."""


class ExtrapolationError(BlowlabError, ValueError):
    """A transformed point fell outside the region where a field is known."""


class ResolutionError(BlowlabError, ValueError):
    """The discretization is too coarse for the requested operation."""


class CapabilityError(BlowlabError, NotImplementedError):
    """The requested geometry/boost combination is not supported directly."""


class DegenerateInputError(BlowlabError, ValueError):
    pass


class NumericalFailureError(BlowlabError, RuntimeError):
    pass


class ConditioningError(BlowlabError, RuntimeError):
    """Left/right eigenvectors of a cluster are (nearly) orthogonal."""


class OverflowFailure(BlowlabError, FloatingPointError):
    """A trajectory produced non-finite values."""


class TailDivergenceError(BlowlabError, RuntimeError):
    pass


class ContractionFailureError(BlowlabError, RuntimeError):
    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


class ShootingFailureError(BlowlabError, RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class InconsistencyError(BlowlabError, RuntimeError):
    """Two independent routes to the same conclusion disagree."""


class PreconditionError(BlowlabError, ValueError):
    """Input data lies outside the smallness regime an operation assumes."""

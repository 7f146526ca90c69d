"""Exception hierarchy shared by all modules."""


class HifbeError(Exception):
    """Base class for every error raised by this package."""


class CatalogMissError(HifbeError, LookupError):
    pass


class OracleFaultError(HifbeError, ArithmeticError):
    """A smooth oracle returned a non-finite value or gradient."""


class CapabilityError(HifbeError):
    """An oracle lacks an evaluator the operation needs (Hessian, subdifferential)."""


class ExponentMismatchError(HifbeError, ValueError):
    """Sampled Hölder ratios diverge under refinement: the declared exponent is too large."""


class BracketTooSmallError(HifbeError):
    """The 1D subproblem minimizer sits on the search bracket boundary."""

    def __init__(self, message, anchor=None, radius=None):
        super().__init__(message)
        self.anchor = anchor
        self.radius = radius


class ProxUnboundedError(HifbeError):
    """The subproblem objective fell below the divergence threshold.

    ``witness`` is the point where it happened and ``ray`` the direction
    from the anchor towards it.
    """

    def __init__(self, message, witness=None, ray=None):
        super().__init__(message)
        self.witness = witness
        self.ray = ray


class EnvelopeUndefinedError(HifbeError):
    """The envelope is -inf at the requested point (prox-boundedness violated)."""

    def __init__(self, message, witness=None, ray=None):
        super().__init__(message)
        self.witness = witness
        self.ray = ray


class LemmaViolationError(HifbeError):
    pass


class ProxBoundViolationError(HifbeError):
    pass


class GammaTooLargeError(HifbeError, ValueError):
    pass


class DependencyError(HifbeError):
    """Constants required by a check are missing."""


class DomainError(HifbeError, ValueError):
    pass

"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for every error raised by halfspace_jump_lab."""


class ConstraintViolation(LabError, ValueError):
    """A parameter bundle violates one of its invariants."""


class CoincidentPoints(LabError, ValueError):
    """Kernel evaluated at x == y where only the off-diagonal formula applies."""


class EnvelopeSearchFailure(LabError, RuntimeError):
    pass


class ToleranceNotMet(LabError, RuntimeError):
    """Adaptive quadrature ran out of subdivisions before reaching its tolerance."""

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class ParameterOutOfRange(LabError, ValueError):
    pass


class NonIntegrableProfile(LabError, ValueError):
    pass


class EmptyFunction(LabError, ValueError):
    pass


class DegenerateSample(LabError, RuntimeError):
    """Every simulated path ended on a cap, so no estimate can be formed."""


class DivergentIntegrand(LabError, ValueError):
    pass


class UsageError(LabError, ValueError):
    """Bad command-line input or configuration file."""

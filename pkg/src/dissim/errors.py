"""Exception hierarchy shared by all modules."""


class DissimError(Exception):
    """Base class for every error raised by the package."""


class DomainError(DissimError, ValueError):
    """A coordinate lies outside the domain of a map."""


class InputError(DissimError, ValueError):
    """Malformed or inconsistent user input."""


class ModelError(DissimError):
    """The operator data violate a structural assumption (e.g. commutativity)."""


class UnsupportedFormError(ModelError):
    """A closed-form expression is requested where it is not valid."""


class SingularityError(DissimError):
    """A matrix that must be inverted is singular or too ill-conditioned.

    Attributes
    ----------
    t : float or None
        Mass coordinate at which the failure occurred.
    z : complex or None
        Spectral parameter.
    """

    def __init__(self, message, t=None, z=None):
        super().__init__(message)
        self.t = t
        self.z = z


class SolverError(DissimError):
    """The Cauchy-problem integrator failed."""


class AccuracyError(SolverError):
    """Step-size control could not reach the requested tolerance."""


class InapplicableError(DissimError):
    """A test does not apply to the given data (reason in the message)."""

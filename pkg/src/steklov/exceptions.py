"""Exception hierarchy.

Validation errors (bad shapes, clusters that are not clusters) derive from
:class:`SteklovValidationError`; numerical breakdowns derive from
:class:`SteklovNumericalError`. The CLI maps the two families to distinct
exit codes.
"""


class SteklovError(Exception):
    """Base class for all errors raised by this package."""


class SteklovValidationError(SteklovError, ValueError):
    """Input does not satisfy a documented precondition."""


class SteklovNumericalError(SteklovError, ArithmeticError):
    """A numerical procedure broke down."""


class NonDiffeo(SteklovValidationError):
    """The blended radial map is not an orientation-preserving diffeomorphism."""


class InvalidShape(SteklovValidationError):
    """A shape or perturbation description is malformed."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NotACluster(SteklovValidationError):
    """Eigenvalues indexed by the requested set are not (numerically) equal."""

    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class GapViolation(SteklovValidationError):
    """An eigenvalue outside the requested set coincides with the cluster."""

    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class ClusterBroken(GapViolation):
    """The cluster lost its spectral gap at a perturbed shape."""


class NormalizationMismatch(SteklovValidationError):
    """An operation received an eigenbasis with the wrong normalization."""


class NotPositiveDefinite(SteklovNumericalError):
    """Cholesky factorization of the stiffness-plus-mass matrix failed."""


class ConvergenceFailure(SteklovNumericalError):
    """The dense symmetric eigensolver did not converge."""


class DegenerateTrace(SteklovNumericalError):
    """The boundary Gram matrix of an eigenbasis is singular."""


class StepFailure(SteklovNumericalError):
    """A flow step could not be made admissible by step halving."""


class EvaluationFailure(SteklovNumericalError):
    """A function sampled by a finite-difference scheme failed."""

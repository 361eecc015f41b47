"""Exception types raised across the package."""


class ParromError(Exception):
    """Base class for all package errors."""


class PoleHit(ParromError):
    """Evaluation point coincides with a pole."""


class StructureError(ParromError):
    """A model does not have the structure an operation requires."""


class Instability(ParromError):
    """A pole has a nonnegative real part somewhere on the parameter domain.

    ``mode`` and ``vertex`` identify the witness when known.
    """

    def __init__(self, message, mode=None, vertex=None):
        super().__init__(message)
        self.mode = mode
        self.vertex = vertex


class NonConvergence(ParromError):
    """An iterative or adaptive procedure hit its work limit."""


class BranchDomain(ParromError):
    """Logarithmic kernel called outside the principal-branch domain."""


class HypothesisFailure(ParromError):
    """Hypothesis of a corollary does not hold for a mode."""


class InternalInconsistency(ParromError):
    """Two routes to the same quantity disagree beyond tolerance."""


class UsageError(ParromError):
    """Bad command-line usage."""

"""Exception hierarchy shared by every phasecluster module."""


class PhaseClusterError(Exception):
    """Base class for all errors raised by phasecluster."""


class NonSquareError(PhaseClusterError, ValueError):
    pass


class DimensionMismatchError(PhaseClusterError, ValueError):
    pass


class NotPhaseDefinedError(PhaseClusterError):
    """Raised when phases are requested for a non-sectorial matrix."""


class NotSectorialError(PhaseClusterError):
    pass


class NotLaplacianError(PhaseClusterError, ValueError):
    pass


class NotStronglyConnectedError(PhaseClusterError):
    pass


class SolverFailure(PhaseClusterError):
    """The conic backend broke down numerically.

    Distinct from infeasibility, which is reported by returning ``None``.
    """


class BudgetExceeded(PhaseClusterError):
    pass


class TooLargeError(PhaseClusterError, ValueError):
    pass


class InvalidSwapError(PhaseClusterError, ValueError):
    pass


class EmptyPathError(PhaseClusterError):
    pass


class MissingCertificateError(PhaseClusterError):
    pass


class DivergedError(PhaseClusterError):
    pass


class ParseError(PhaseClusterError):
    """Malformed input file; the message carries line/field context."""

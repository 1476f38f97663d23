"""Exception types raised across the package.

Every contract violation has a dedicated class so callers can tell a bad
configuration apart from a numerical failure.
"""


class EegHarmonizeError(Exception):
    """Base class for all package errors."""


class NonFiniteError(EegHarmonizeError):
    """Input contains NaN or infinite values."""


class DegenerateInputError(EegHarmonizeError):
    """Too few samples to estimate the requested quantity."""


class NotSpdError(EegHarmonizeError):
    """Matrix is not symmetric positive definite."""


class DimMismatchError(EegHarmonizeError):
    """Operands have incompatible dimensions."""


class NoConvergenceError(EegHarmonizeError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None, final_gradient_norm=None):
        super().__init__(message)
        self.iterations = iterations
        self.final_gradient_norm = final_gradient_norm


class ZeroPositionError(EegHarmonizeError):
    """Electrode position at the origin cannot be projected onto a sphere."""


class UnknownChannelError(EegHarmonizeError):
    """Channel name not found in the reference set."""


class EmptyIntersectionError(EegHarmonizeError):
    """Montages share no channels."""


class TooFewChannelsError(EegHarmonizeError):
    """Operation needs more source channels than were given."""


class SingularSystemError(EegHarmonizeError):
    """Linear system could not be solved."""


class SourceSpaceMismatchError(EegHarmonizeError):
    """Leadfields were built from different source spaces."""


class DipoleOutsideSphereError(EegHarmonizeError):
    """Dipole must lie strictly inside the electrode sphere."""


class ChannelOrderMismatchError(EegHarmonizeError):
    """Epoch channel order does not match the operator's source channels."""


class UncoveredChannelError(EegHarmonizeError):
    """A union channel is observed in no training dataset."""


class InvalidBandError(EegHarmonizeError):
    """Band edges violate 0 < low < high < nyquist."""


class UpsamplingError(EegHarmonizeError):
    """Resampling above the original rate is not supported."""


class SingleClassError(EegHarmonizeError):
    """Training data must contain at least two classes."""


class TooFewPairsError(EegHarmonizeError):
    """Not enough non-zero paired differences for the test."""


class TooFewEpochsError(EegHarmonizeError):
    """Not enough epochs per class for the requested split."""


class InvalidSpecError(EegHarmonizeError):
    """Simulation spec failed validation."""

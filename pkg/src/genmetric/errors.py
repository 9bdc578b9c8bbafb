"""Exception hierarchy shared by all genmetric modules.

Every error raised by the engine derives from GenmetricError so callers
(and the CLI exit-code mapping) can distinguish engine failures from bugs.
"""


class GenmetricError(Exception):
    """Base class for all engine errors."""


class ValidationError(GenmetricError):
    """Input violates a documented invariant or precondition."""


class FormatError(GenmetricError):
    """File content does not match the declared on-disk format."""


class DataError(GenmetricError):
    """Numeric payload is unusable (non-finite entries, etc.)."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class IoError(GenmetricError):
    """Filesystem operation failed (unwritable path, ...)."""


class InsufficientSamples(ValidationError):
    """Operation needs more rows than the input provides."""


class DimError(ValidationError):
    """Dimension mismatch between two inputs."""


class NumericalError(GenmetricError):
    """A numeric routine failed beyond recoverable tolerance."""


class InfiniteDivergence(GenmetricError):
    """KL divergence is +inf (absolute-continuity violation, no smoothing)."""


class SequenceError(GenmetricError):
    """Out-of-order epoch fed to the training monitor."""


class StateError(GenmetricError):
    """Operation invalid for the current state (e.g. update after stop)."""


class ExternalError(GenmetricError):
    """External command failed; carries the captured output."""

    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


class TuningError(GenmetricError):
    """Hyperparameter sweep produced no usable evaluation."""


class SingularCovarianceWarning(UserWarning):
    """Emitted when N <= D makes the sample covariance singular."""

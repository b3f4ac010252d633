"""Exception types shared across the package."""


class LoopMemError(Exception):
    """Base class for all package-specific errors."""


class InvalidStateError(LoopMemError):
    """State or matrix violates a physicality constraint (norm, PSD, trace)."""


class GainError(LoopMemError):
    """An operator or transmission would amplify (singular value or t > 1)."""


class UnschedulableError(LoopMemError):
    """Requested switch timing cannot be realized by the drive hardware."""


class IncompleteSetError(LoopMemError):
    """Measurement set does not span the state space (singular design)."""


class NoSignalError(LoopMemError):
    """Dataset carries no usable counts for the requested analysis."""


class SchemaError(LoopMemError):
    """Scenario or dataset file is malformed.

    `field` is the dotted path of the offending entry when known.
    """

    def __init__(self, message: str, *, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field

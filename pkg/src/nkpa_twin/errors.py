"""Exception hierarchy shared by all modules."""


class NkpaError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NkpaError, ValueError):
    """An argument lies outside the domain of a formula."""


class UnphysicalStateError(NkpaError, ValueError):
    """Second moments do not describe a physical (or realizable) state."""


class UndefinedCorrelationError(NkpaError, ZeroDivisionError):
    """A normalized correlation has a vanishing denominator."""


class SubtractionError(NkpaError, ValueError):
    """ON/OFF subtraction left a non-positive signal power.

    Carries the ON and OFF mean powers for each failing channel.
    """

    def __init__(self, message, on_mean=None, off_mean=None):
        super().__init__(message)
        self.on_mean = on_mean
        self.off_mean = off_mean


class LengthError(NkpaError, ValueError):
    """A sequence has a length the operation cannot accept."""


class AlignmentError(LengthError):
    """ON and OFF (or a/b) streams do not line up."""


class PartitionError(NkpaError, ValueError):
    """Buffers cannot be split into equal segments."""


class FitError(NkpaError, RuntimeError):
    """A least-squares fit did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateModelError(FitError):
    """Data carry no information about the model's shape parameters."""


class ConfigError(NkpaError, ValueError):
    """Invalid configuration; ``field`` holds the dotted path of the culprit."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ProvenanceError(NkpaError, ValueError):
    """Record files do not match the configuration that claims them."""


class RecordFormatError(NkpaError, ValueError):
    """Base for binary record file problems. ``code`` is stable across versions."""

    code = 1


class MagicError(RecordFormatError):
    code = 2


class HeaderError(RecordFormatError):
    code = 3


class VersionError(RecordFormatError):
    code = 4


class TruncatedError(RecordFormatError):
    code = 5


class DigestMismatchError(RecordFormatError):
    code = 6

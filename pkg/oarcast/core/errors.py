"""Exception hierarchy shared by all modules."""

from typing import Optional


class OarcastError(Exception):
    """Base class for every error raised by oarcast."""


class FrameValidationError(OarcastError):
    """An OAR frame violates an attribute or relation invariant."""
    
    def __init__(
        self,
        message: str,
        object_id: Optional[int] = None,
        field: Optional[str] = None
    ):
        super().__init__(message)
        self.object_id = object_id
        self.field = field


class TrackParseError(OarcastError):
    """A track or mask file could not be parsed."""
    
    def __init__(self, message: str, locus: str = ""):
        super().__init__(f"{locus}: {message}" if locus else message)
        self.locus = locus


class IngestionError(OarcastError):
    """Track records cannot be assembled into OAR sequences."""


class CapacityError(OarcastError):
    """A frame exceeds what the bitstream format can represent."""


class BitstreamDecodeError(OarcastError):
    """A bitstream cannot be decoded."""


class CrcMismatchError(BitstreamDecodeError):
    """The CRC trailer does not match the received bits."""


class TruncatedStreamError(BitstreamDecodeError):
    """The bitstream ends before the announced content."""


class ConfigurationError(OarcastError):
    """Invalid configuration, missing plug-in or mismatched weights."""


class ContractViolation(OarcastError):
    """An operator was called with arguments outside its contract."""


class PipelineError(OarcastError):
    """End-to-end orchestration cannot proceed."""

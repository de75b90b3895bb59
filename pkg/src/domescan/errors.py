"""Exception hierarchy shared across the pipeline.

Decode-side errors are split finely (BadMagic vs TruncatedPacket etc.) so the
ingest layer can decide between dropping a datagram and aborting the stream.
"""


class DomescanError(Exception):
    """Base class for all library errors."""


# --- metadata / validation ---

class MalformedDocument(DomescanError):
    """Input document is not syntactically valid (e.g. broken JSON)."""


class SchemaViolation(DomescanError):
    """A required field is missing or has the wrong type."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"schema violation in field '{field}'")


class InvariantViolation(DomescanError):
    """A structurally valid document or object breaks a domain invariant."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invariant violated by field '{field}'")


# --- wire format ---

class BadMagic(DomescanError):
    """Packet or container does not start with the expected magic bytes."""


class UnsupportedVersion(DomescanError):
    """Packet version byte is not one we know how to decode."""


class TruncatedPacket(DomescanError):
    """Buffer is shorter than the length implied by its header."""


# --- ingest ---

class BeamCountMismatch(DomescanError):
    """Packet beam count disagrees with the sensor intrinsics."""


class BindFailure(DomescanError):
    """UDP socket could not be bound."""


class InsufficientFrames(DomescanError):
    """Benchmark source holds fewer frames than required."""


# --- projection / representation ---

class IndexOutOfRange(DomescanError):
    """Measurement id or beam index outside the scan geometry."""


class DimensionMismatch(DomescanError):
    """Grids that must share dimensions do not."""


class MissingPoints(DomescanError):
    """A seven-channel representation was requested without a point image."""


# --- tensor container ---

class TruncatedFile(DomescanError):
    """Container file ends before the payload its header promises."""


class DimOverflow(DomescanError):
    """Container dimensions exceed what the format can express."""


# --- dataset / evaluation ---

class TooFewFrames(DomescanError):
    """Dataset split requires at least three frames."""


class UnknownChannel(DomescanError):
    """Referenced channel name is not part of the configuration."""

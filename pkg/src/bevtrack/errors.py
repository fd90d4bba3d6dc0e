"""Exception types raised across the package."""


class BevTrackError(Exception):
    """Base class for every error raised by bevtrack."""


class ValidationError(BevTrackError, ValueError):
    """Input data failed validation."""


class MalformedDocument(ValidationError):
    """The document is not syntactically valid JSON / NDJSON."""


class SchemaViolation(ValidationError):
    """A required field is missing or has the wrong shape or type."""


class InvariantViolation(ValidationError):
    """A field is well-formed but violates a domain invariant."""


class DuplicateTrackId(ValidationError):
    """Two boxes in the same output frame share a track id."""


class DegenerateBox(BevTrackError, ValueError):
    """A box footprint has zero area."""


class NonPositiveDt(BevTrackError, ValueError):
    pass


class NonMonotonicTimestamp(BevTrackError, ValueError):
    pass


class EmptySeries(BevTrackError, ValueError):
    pass


class SeriesTooShort(BevTrackError, ValueError):
    pass


class NoPeaks(BevTrackError, ValueError):
    pass

"""Exception types shared across the package.

Everything raised on purpose derives from SeatwatchError so callers (CLI,
HTTP service) can map failures to exit codes / status codes in one place.
"""


class SeatwatchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SeatwatchError):
    """Invalid thresholds, ranges or other caller-supplied configuration."""


class LayoutError(SeatwatchError):
    """Seat layout failed validation. Carries the offending seat_id when known."""

    def __init__(self, message: str, seat_id: int | None = None):
        super().__init__(message)
        self.seat_id = seat_id


class SegmentationError(LayoutError):
    """A seat region collapsed to zero pixels for the given frame size."""


class RenderError(SeatwatchError):
    """Synthetic scene cannot be rendered (e.g. frame too small)."""


class OracleMisuseError(SeatwatchError):
    """An oracle backend was fed a frame that does not match its scene."""


class UndefinedMetricError(SeatwatchError):
    """Metric requested on an empty/degenerate sample."""


class ProcessingError(SeatwatchError):
    """A backend failed while a frame was being processed."""

    def __init__(self, message: str, frame_id: str):
        super().__init__(message)
        self.frame_id = frame_id


class BackendError(SeatwatchError):
    """A detector/classifier backend failed."""


class ModelNotFoundError(BackendError):
    """Model file or sidecar config missing."""


class ModelFormatError(BackendError):
    """Model or sidecar config present but malformed."""


class UnmappedClassError(ModelFormatError):
    """Sidecar declares a class index with no entry in the class map."""


class NotFoundError(SeatwatchError):
    """Unknown room / seat / resource (HTTP 404)."""


class ConflictError(SeatwatchError):
    """Resource already exists (HTTP 409)."""


class ValidationError(SeatwatchError):
    """Malformed request payload (HTTP 422)."""

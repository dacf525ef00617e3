"""Exception hierarchy shared by every jamcast module."""


class JamcastError(Exception):
    """Base class for all library errors."""


class DomainError(JamcastError, ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(JamcastError, ValueError):
    """A record or parameter breaks a documented invariant."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ShapeError(JamcastError, ValueError):
    """Dimension or length mismatch between inputs."""


class InsufficientDataError(JamcastError):
    """Not enough observations to carry out the requested operation."""


class ConvergenceError(JamcastError):
    """The SMO solver hit its iteration cap before meeting the KKT tolerance."""

    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class NoDominantPeriodError(JamcastError):
    """A periodogram carries no positive power."""


class SearchFailedError(JamcastError):
    """Every hyperparameter grid point failed to train."""


class ParseError(JamcastError, ValueError):
    """Malformed payload, CSV row or model file.

    ``location`` is a JSON path (``roads[0].jam_factor``) or a line number.
    """

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class IngestionError(JamcastError):
    """A provider request failed; the poll cycle may be retried next slot."""

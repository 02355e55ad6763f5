"""Exception types shared across the package."""


class GeosmoothError(Exception):
    """Base class for all package errors."""


class DomainError(GeosmoothError):
    """An argument violates a mathematical precondition (bad interval,
    probability outside (0,1), division by an interval containing zero, ...)."""


class FormatError(GeosmoothError):
    """A file or payload does not match its declared format.

    ``location`` names the offending byte offset or JSON path when known.
    """

    def __init__(self, message, location=None):
        self.message = message
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class BackendError(GeosmoothError):
    """An external classifier process misbehaved (bad handshake, malformed
    response, crash).  ``payload`` carries the raw offending data."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class InfeasibleInput(GeosmoothError):
    """Every parameter cell was pruned while inverting an image: the input is
    not a transform of any image under the given parameter set."""

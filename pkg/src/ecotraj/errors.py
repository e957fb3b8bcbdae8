"""Exception types raised across the package."""


class EcoError(Exception):
    """Base class for all package errors."""


class OrderingError(EcoError, ValueError):
    """A timestamp precedes the stream origin."""


class AssignmentError(EcoError, ValueError):
    """A record does not belong to the time step it was assigned to."""


class ParameterError(EcoError, ValueError):
    """A parameter is outside its valid range."""


class PreconditionError(EcoError, ValueError):
    """An operation was called on state it cannot handle."""


class SequencingError(EcoError, ValueError):
    """Snapshots were fed to the engine out of order."""


class DataError(EcoError, ValueError):
    """Input data could not be parsed."""

"""Exception types shared across the package."""


class RWRSError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(RWRSError, ValueError):
    """Unknown identifiers, malformed tables or invalid experiment configs."""


class DomainError(RWRSError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(RWRSError, ValueError):
    """An operation was called in a way its contract does not allow."""


class ResourceError(RWRSError, RuntimeError):
    """A configured computational budget was exceeded.

    ``reached`` records how far the computation got (for trajectories, the
    last checkpoint that was completed, or 0).
    """

    def __init__(self, message, reached=0):
        super().__init__(message)
        self.reached = reached

"""Exception hierarchy."""


class PSDError(Exception):
    """Base class for all errors raised by permdecomp."""


class InvalidInputError(PSDError, ValueError):
    """Arguments violate an operation's preconditions."""


class ResolutionError(InvalidInputError):
    """A grid cannot resolve the requested wave packet."""


class ResourceLimitError(PSDError):
    """An exact enumeration would exceed its configured bound."""


class NotFoundError(PSDError):
    """A search over a finite family produced no admissible candidate."""


class ConfigError(PSDError):
    """A scenario configuration is malformed."""


class NumericalError(PSDError):
    """A numerical routine failed its own accuracy check."""

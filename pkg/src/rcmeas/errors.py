"""Exception types raised by rcmeas."""


class RCMeasError(Exception):
    """Base class for all rcmeas errors."""


class DimensionError(RCMeasError, ValueError):
    """Shapes or lengths that do not fit together."""


class DomainError(RCMeasError, ValueError):
    """An input outside the mathematical domain of an operation."""


class ResourceError(RCMeasError):
    """A configured size cap would be exceeded."""


class DimensionCapError(ResourceError):
    pass


class EnumerationCapError(ResourceError):
    pass


class UnsupportedError(RCMeasError):
    """A valid request that this version deliberately does not handle."""

"""Exception types shared across the package."""


class Chi2RegimesError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(Chi2RegimesError, ValueError):
    """A function argument is outside its documented domain."""


class InvalidInputError(Chi2RegimesError, ValueError):
    """Supplied data objects are inconsistent (dimension mismatch, bad counts)."""


class DataFormatError(InvalidInputError):
    """A data file (counts CSV, probs CSV, config JSON) could not be parsed."""


class UsageError(Chi2RegimesError, ValueError):
    """A parsed configuration or CLI invocation is invalid."""


class ResourceLimitError(Chi2RegimesError, RuntimeError):
    """The operation would exceed a documented memory or size limit."""

"""Exception types shared across the package."""


class GendetectError(Exception):
    """Base class for all package errors."""


class ParseError(GendetectError):
    """A corpus file line could not be parsed."""


class SchemaError(GendetectError):
    """A record is missing fields or has fields of the wrong shape."""


class ValidationError(GendetectError):
    """A value violates a documented invariant."""


class InsufficientDataError(GendetectError):
    """A split or class does not have enough records after filtering."""


class TrainingError(GendetectError):
    """Training diverged or was given unusable data."""

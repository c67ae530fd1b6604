"""Bus-level error types. Service-specific errors live with their services."""

from ..errors import MinifError


class FrameTooLarge(MinifError):
    pass


class InvalidField(MinifError):
    pass


class Truncated(MinifError):
    pass


class BadEncoding(MinifError):
    pass


class UnknownKind(MinifError):
    pass


class NameNotFound(MinifError):
    pass


class NameServiceUnavailable(MinifError):
    pass


class DuplicateLocalName(MinifError):
    pass


class BusTimeout(MinifError):
    code = "Timeout"


class Disconnected(MinifError):
    pass


class UnknownEndpoint(MinifError):
    pass


class UnknownOp(MinifError):
    pass

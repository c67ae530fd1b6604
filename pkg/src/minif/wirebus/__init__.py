"""Location-transparent object invocation: wire frames, name service,
event publication, and connection-health tracking."""

from .frame import Frame, encode_frame, decode_frame, read_frame, new_id
from .errors import (
    FrameTooLarge, InvalidField, Truncated, BadEncoding, UnknownKind,
    NameNotFound, NameServiceUnavailable, DuplicateLocalName,
    BusTimeout, Disconnected, UnknownEndpoint,
)
from .node import BusNode, ObjectRef, ConnectionState, Subscription
from .hub import Hub

__all__ = [
    "Frame", "encode_frame", "decode_frame", "read_frame", "new_id",
    "FrameTooLarge", "InvalidField", "Truncated", "BadEncoding", "UnknownKind",
    "NameNotFound", "NameServiceUnavailable", "DuplicateLocalName",
    "BusTimeout", "Disconnected", "UnknownEndpoint",
    "BusNode", "ObjectRef", "ConnectionState", "Subscription", "Hub",
]

"""Semi-stateless persistence: append-only log + snapshot behind bus ops."""

from .store import (Store, PersistentRecord, VersionConflict, StorageFailure,
                    CorruptStore, UnknownClass, BadDocument)
from .broker import BrokerServant
from .client import BrokerClient

__all__ = [
    "Store", "PersistentRecord", "VersionConflict", "StorageFailure",
    "CorruptStore", "UnknownClass", "BadDocument",
    "BrokerServant", "BrokerClient",
]

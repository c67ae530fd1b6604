"""Lock-and-key reservation of control points."""

from .service import (ReservationService, ReservationEntry, AlreadyReserved,
                      UnknownTaxon, UnknownKey, NotReserved, PartialConflict)
from .client import ReserveClient

__all__ = [
    "ReservationService", "ReservationEntry", "AlreadyReserved",
    "UnknownTaxon", "UnknownKey", "NotReserved", "PartialConflict",
    "ReserveClient",
]

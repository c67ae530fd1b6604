"""Central audit-trace message log and machine history."""

from .service import (LogRecord, HistoryEvent, LogService, LogServant,
                      BadFilter, BadEvent, SEVERITY_ORDER)
from .client import LogClient
from .sampler import SensorSampler

__all__ = [
    "LogRecord", "HistoryEvent", "LogService", "LogServant",
    "BadFilter", "BadEvent", "SEVERITY_ORDER",
    "LogClient", "SensorSampler",
]

"""Integrated process management: heartbeats, liveness, failover."""

from .service import (ProcessRecord, SystemManager, SysmgrServant, Duplicate,
                      Unknown, PolicyExhausted, HEARTBEAT_INTERVAL_MS)

__all__ = [
    "ProcessRecord", "SystemManager", "SysmgrServant", "Duplicate",
    "Unknown", "PolicyExhausted", "HEARTBEAT_INTERVAL_MS",
]

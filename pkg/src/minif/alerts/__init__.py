"""Operator-gated exception handling."""

from .service import (Alert, AlertService, AlertServant, UnknownAlert,
                      AlreadyResponded, BadChoice, SEVERITIES)
from .client import AlertClient, ScriptedOperator

__all__ = [
    "Alert", "AlertService", "AlertServant", "UnknownAlert",
    "AlreadyResponded", "BadChoice", "SEVERITIES",
    "AlertClient", "ScriptedOperator",
]

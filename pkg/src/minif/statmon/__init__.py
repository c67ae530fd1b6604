"""Deadband-filtered push-model status dissemination."""

from ..values import StatusValue
from .monitor import (ChannelConfig, StatusUpdate, StatusMonitor,
                      UnknownChannel, BadConfig, TagMismatch)
from .mirror import StatusMirror

__all__ = [
    "StatusValue", "ChannelConfig", "StatusUpdate", "StatusMonitor",
    "UnknownChannel", "BadConfig", "TagMismatch", "StatusMirror",
]

"""Subscriber-side aggregation of published status.

Keeps the latest update per channel, re-tags retained replays as the
synthetic initial snapshot a new subscriber is owed, and cross-checks
per-channel sequence numbers against the bus drop accounting.
"""

from __future__ import annotations

import threading
from typing import Callable

from .monitor import TOPIC_PREFIX, StatusUpdate


class StatusMirror:
    def __init__(self, node, prefix: str = ""):
        self.node = node
        self._latest: dict[str, StatusUpdate] = {}
        self._lock = threading.Lock()
        self._listeners: list[Callable[[StatusUpdate], None]] = []
        self._cond = threading.Condition(self._lock)
        self.seq_gaps = 0
        self.bus_drops = 0
        self._sub = node.subscribe(TOPIC_PREFIX + prefix, self._on_event)

    def _on_event(self, topic: str, args: dict):
        update = StatusUpdate.from_args(args)
        if "_retained" in args:
            update.reason = "initial"
        dropped = args.get("_dropped")
        with self._lock:
            prev = self._latest.get(update.channel)
            if prev is not None and update.seq <= prev.seq:
                return  # stale replay
            if prev is not None and update.seq > prev.seq + 1:
                self.seq_gaps += update.seq - prev.seq - 1
            if dropped is not None:
                self.bus_drops += dropped.value
            self._latest[update.channel] = update
            listeners = list(self._listeners)
            self._cond.notify_all()
        for cb in listeners:
            cb(update)

    def add_listener(self, cb: Callable[[StatusUpdate], None]) -> None:
        with self._lock:
            self._listeners.append(cb)

    def snapshot(self, prefix: str = "") -> dict[str, StatusUpdate]:
        with self._lock:
            return {c: u for c, u in self._latest.items() if c.startswith(prefix)}

    def get(self, channel: str) -> StatusUpdate | None:
        with self._lock:
            return self._latest.get(channel)

    def wait_for(self, channel: str, pred, timeout_s: float = 5.0) -> StatusUpdate | None:
        """Block until the channel's latest value satisfies pred."""
        import time
        deadline = time.monotonic() + timeout_s
        with self._lock:
            while True:
                u = self._latest.get(channel)
                if u is not None and pred(u):
                    return u
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)

    def close(self):
        self._sub.cancel()

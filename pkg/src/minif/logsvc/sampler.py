"""Periodic sensor sampling into machine history.

Reads the latest published status per channel and writes one reading event
per channel per period. Driven by tick() so tests can use a stepped clock;
run_wall() wraps it in a timer thread for deployments.
"""

from __future__ import annotations

import threading
from typing import Callable

from ..errors import MinifError
from ..values import unwrap

MIN_PERIOD_MS = 1000


class SensorSampler:
    def __init__(self, snapshot: Callable[[str], dict],
                 record_history: Callable[[str, str, dict], None],
                 period_ms: int = 10_000, prefix: str = ""):
        if period_ms < MIN_PERIOD_MS:
            raise MinifError(f"period {period_ms} ms below 1000 ms floor")
        self.snapshot = snapshot
        self.record_history = record_history
        self.period_ms = period_ms
        self.prefix = prefix
        self._last_sample_ms: int | None = None
        self.samples_written = 0
        self._stop = threading.Event()
        self._thread = None

    def tick(self, now_ms: int) -> int:
        """Sample if a period elapsed; returns readings written."""
        if self._last_sample_ms is not None and now_ms - self._last_sample_ms < self.period_ms:
            return 0
        self._last_sample_ms = now_ms
        written = 0
        for channel, update in sorted(self.snapshot(self.prefix).items()):
            value = update.value if not hasattr(update.value, "tag") else unwrap(update.value)
            self.record_history(channel, "reading", {"value": value})
            written += 1
        self.samples_written += written
        return written

    def run_wall(self):
        import time

        def loop():
            while not self._stop.wait(self.period_ms / 1000.0):
                try:
                    self.tick(time.time_ns() // 1_000_000)
                except MinifError:
                    pass

        self._thread = threading.Thread(target=loop, name="sensor-sampler", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()

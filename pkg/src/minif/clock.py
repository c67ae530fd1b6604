"""Injectable time source: wall clock for deployments, stepped clock for tests.

All timestamps in the system are integer epoch milliseconds; the wire format
renders them as YYYY-MM-DDThh:mm:ss.mmmZ.
"""

from __future__ import annotations

import re
import threading
import time
from datetime import datetime, timezone

TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")


def format_ts(epoch_ms: int) -> str:
    dt = datetime.fromtimestamp(epoch_ms / 1000.0, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{epoch_ms % 1000:03d}Z"


def parse_ts(text: str) -> int:
    if not TS_RE.match(text):
        raise ValueError(f"bad timestamp: {text!r}")
    dt = datetime.strptime(text[:-5], "%Y-%m-%dT%H:%M:%S").replace(tzinfo=timezone.utc)
    return int(dt.timestamp()) * 1000 + int(text[-4:-1])


class Clock:
    def now_ms(self) -> int:
        raise NotImplementedError

    def now_ts(self) -> str:
        return format_ts(self.now_ms())


class WallClock(Clock):
    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def sleep_ms(self, ms: float) -> None:
        time.sleep(ms / 1000.0)


class SimClock(Clock):
    """Manually advanced clock. `advance` wakes anything polling via condition."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms
        self._cond = threading.Condition()

    def now_ms(self) -> int:
        with self._cond:
            return self._now

    def advance(self, ms: int) -> int:
        with self._cond:
            self._now += ms
            self._cond.notify_all()
            return self._now

    def set(self, ms: int) -> None:
        with self._cond:
            if ms < self._now:
                raise ValueError("sim clock cannot move backwards")
            self._now = ms
            self._cond.notify_all()


WALL = WallClock()

"""Fire-and-forget log client with a bounded outage buffer.

Logging must never block control: records queue locally (drop-oldest at
4,096 with accounting) and a flusher ships batches when the server is
reachable. After an outage the flusher reports its own drop count as a
warning record.
"""

from __future__ import annotations

import json
import logging
import threading

from ..errors import MinifError
from ..values import canonical_json
from .service import SERVICE_NAME, HistoryEvent, LogRecord

log = logging.getLogger(__name__)

BUFFER_LIMIT = 4096


class LogClient:
    def __init__(self, node, source_process: str, flush_interval_s: float = 0.2,
                 auto_flush: bool = True, timeout_ms: int = 3000):
        self.node = node
        self.source_process = source_process
        self.timeout_ms = timeout_ms
        self._buffer: list[dict] = []
        self._dropped = 0
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._flusher = None
        if auto_flush:
            self._flusher = threading.Thread(target=self._flush_loop,
                                             args=(flush_interval_s,),
                                             name=f"log-flush-{source_process}",
                                             daemon=True)
            self._flusher.start()

    def log(self, severity: str, source: str, text: str, **attrs) -> None:
        entry = {"severity": severity, "source": f"{self.source_process}/{source}",
                 "text": text, "attrs": {**attrs, "client_ts": _now_ms()}}
        with self._lock:
            if len(self._buffer) >= BUFFER_LIMIT:
                self._buffer.pop(0)
                self._dropped += 1
            self._buffer.append(entry)

    def _flush_loop(self, interval_s: float):
        while not self._stop.wait(interval_s):
            try:
                self.flush()
            except MinifError:
                pass  # server away; keep buffering

    def flush(self) -> int:
        """Ship everything buffered; raises if the server is unreachable."""
        with self._lock:
            batch, self._buffer = self._buffer, []
            dropped, self._dropped = self._dropped, 0
        if dropped:
            batch.insert(0, {"severity": "warning",
                             "source": f"{self.source_process}/logclient",
                             "text": f"log buffer overflowed; {dropped} records dropped",
                             "attrs": {"dropped": dropped}})
        if not batch:
            return 0
        try:
            self.node.invoke(SERVICE_NAME, "append",
                             {"records": canonical_json(batch)},
                             timeout_ms=self.timeout_ms)
        except MinifError:
            with self._lock:  # put them back, oldest first
                self._buffer[0:0] = batch[-BUFFER_LIMIT:]
                overflow = len(self._buffer) - BUFFER_LIMIT
                if overflow > 0:
                    del self._buffer[BUFFER_LIMIT:]
                    self._dropped += overflow
            raise
        return len(batch)

    def record_history(self, component: str, kind: str, data: dict) -> None:
        self.node.invoke(SERVICE_NAME, "record_history",
                         {"component": component, "kind": kind,
                          "data": canonical_json(data)}, timeout_ms=self.timeout_ms)

    def usage_report(self, component: str) -> dict:
        out = self.node.invoke(SERVICE_NAME, "usage_report", {"component": component},
                               timeout_ms=self.timeout_ms)
        return json.loads(out["report"].value)

    def query(self, **kw) -> list[LogRecord]:
        out = self.node.invoke(SERVICE_NAME, "query", kw, timeout_ms=self.timeout_ms)
        return [LogRecord.from_json(o) for o in json.loads(out["records"].value)]

    def history_query(self, component: str = "", kind: str | None = None) -> list[HistoryEvent]:
        args = {"component": component}
        if kind is not None:
            args["kind"] = kind
        out = self.node.invoke(SERVICE_NAME, "history_query", args,
                               timeout_ms=self.timeout_ms)
        return [HistoryEvent.from_json(o) for o in json.loads(out["events"].value)]

    def pending(self) -> int:
        with self._lock:
            return len(self._buffer)

    def close(self):
        self._stop.set()
        try:
            self.flush()
        except MinifError:
            pass


def _now_ms() -> int:
    import time
    return time.time_ns() // 1_000_000

"""Central log server: one clock orders everything.

Records are timestamped on receipt (client clocks ride along as an
attribute but never order anything), appended to the persistent store, and
never mutated. Machine history events share the machinery with running
usage counters folded per component.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Optional

from ..clock import Clock, WALL
from ..errors import MinifError
from ..values import canonical_json, sv_text
from ..wirebus.node import OpServant

SERVICE_NAME = "svc.log"
SEVERITY_ORDER = {"debug": 0, "info": 1, "warning": 2, "error": 3}
HISTORY_KINDS = ("installed", "serviced", "usage", "abnormal", "reading")


class BadFilter(MinifError):
    pass


class BadEvent(MinifError):
    pass


@dataclass
class LogRecord:
    ts: int                     # server-assigned epoch ms
    seq: int
    severity: str
    source: str
    text: str
    attrs: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ts": self.ts, "seq": self.seq, "severity": self.severity,
                "source": self.source, "text": self.text, "attrs": self.attrs}

    @classmethod
    def from_json(cls, obj: dict) -> "LogRecord":
        return cls(ts=obj["ts"], seq=obj["seq"], severity=obj["severity"],
                   source=obj["source"], text=obj["text"], attrs=obj.get("attrs", {}))


@dataclass
class HistoryEvent:
    component: str
    kind: str
    data: dict
    ts: int = 0
    seq: int = 0

    def to_json(self) -> dict:
        return {"component": self.component, "kind": self.kind, "data": self.data,
                "ts": self.ts, "seq": self.seq}

    @classmethod
    def from_json(cls, obj: dict) -> "HistoryEvent":
        return cls(component=obj["component"], kind=obj["kind"],
                   data=obj.get("data", {}), ts=obj["ts"], seq=obj["seq"])


class LogService:
    def __init__(self, store=None, clock: Clock = WALL):
        self.store = store
        self.clock = clock
        self._records: list[LogRecord] = []
        self._events: list[HistoryEvent] = []
        self._counters: dict[str, dict] = {}
        self._lock = threading.Lock()
        if store is not None:
            self._recover()

    def _recover(self):
        for rec in self.store.load_class("logrec"):
            self._records.append(LogRecord.from_json(json.loads(rec.payload["blob"].value)))
        self._records.sort(key=lambda r: r.seq)
        for rec in self.store.load_class("histev"):
            ev = HistoryEvent.from_json(json.loads(rec.payload["blob"].value))
            self._events.append(ev)
            self._fold(ev)
        self._events.sort(key=lambda e: e.seq)

    # -- message log ---------------------------------------------------------

    def append(self, entries: list[dict]) -> int:
        """Store a batch. Each entry: severity, source, text, attrs?."""
        with self._lock:
            now = self.clock.now_ms()
            batch = []
            new = []
            for entry in entries:
                severity = entry.get("severity", "info")
                if severity not in SEVERITY_ORDER:
                    severity = "info"
                rec = LogRecord(ts=now, seq=len(self._records) + len(new) + 1,
                                severity=severity, source=entry.get("source", "?"),
                                text=entry.get("text", ""),
                                attrs=entry.get("attrs", {}))
                new.append(rec)
                batch.append(("logrec", f"{rec.seq:010d}",
                              {"blob": sv_text(canonical_json(rec.to_json()))}))
            if self.store is not None and batch:
                self.store.put_many(batch)
            self._records.extend(new)
            return len(new)

    def query(self, since_ms: int | None = None, until_ms: int | None = None,
              severity_at_least: str | None = None, source_prefix: str = "",
              text_contains: str = "") -> list[LogRecord]:
        if severity_at_least is not None and severity_at_least not in SEVERITY_ORDER:
            raise BadFilter(f"severity {severity_at_least!r}")
        if since_ms is not None and until_ms is not None and until_ms < since_ms:
            raise BadFilter("until < since")
        floor = SEVERITY_ORDER.get(severity_at_least, 0)
        with self._lock:
            out = []
            for rec in self._records:
                if since_ms is not None and rec.ts < since_ms:
                    continue
                if until_ms is not None and rec.ts > until_ms:
                    continue
                if SEVERITY_ORDER[rec.severity] < floor:
                    continue
                if not rec.source.startswith(source_prefix):
                    continue
                if text_contains and text_contains not in rec.text:
                    continue
                out.append(rec)
            return out

    def count(self) -> int:
        with self._lock:
            return len(self._records)

    # -- machine history -------------------------------------------------------

    def record_history(self, component: str, kind: str, data: dict) -> HistoryEvent:
        if kind not in HISTORY_KINDS:
            raise BadEvent(f"kind {kind!r}")
        if kind == "usage":
            inc = data.get("increment")
            if not isinstance(inc, int) or inc < 1:
                raise BadEvent("usage needs integer increment >= 1")
        if kind == "reading" and "value" not in data:
            raise BadEvent("reading needs a value")
        with self._lock:
            ev = HistoryEvent(component=component, kind=kind, data=dict(data),
                              ts=self.clock.now_ms(), seq=len(self._events) + 1)
            if self.store is not None:
                self.store.put("histev", f"{ev.seq:010d}",
                               {"blob": sv_text(canonical_json(ev.to_json()))})
            self._events.append(ev)
            self._fold(ev)
            return ev

    def _fold(self, ev: HistoryEvent):
        c = self._counters.setdefault(ev.component, {
            "usage_count": 0, "service_time_ms": 0, "abnormal_count": 0,
            "last_reading": None})
        if ev.kind == "usage":
            c["usage_count"] += ev.data.get("increment", 0)
            c["service_time_ms"] += ev.data.get("service_time_ms", 0)
        elif ev.kind == "serviced":
            c["service_time_ms"] += ev.data.get("service_time_ms", 0)
        elif ev.kind == "abnormal":
            c["abnormal_count"] += 1
        elif ev.kind == "reading":
            c["last_reading"] = ev.data.get("value")

    def usage_report(self, component: str) -> dict:
        """Pure fold over the component's events; all-zero when unknown."""
        with self._lock:
            c = self._counters.get(component)
            if c is None:
                return {"usage_count": 0, "service_time_ms": 0,
                        "abnormal_count": 0, "last_reading": None}
            return dict(c)

    def history_events(self, component: str = "", kind: str | None = None) -> list[HistoryEvent]:
        with self._lock:
            return [e for e in self._events
                    if e.component.startswith(component)
                    and (kind is None or e.kind == kind)]


class LogServant(OpServant):
    def __init__(self, service: LogService):
        self.service = service

    def op_append(self, args, ctx):
        stored = self.service.append(json.loads(args["records"].value))
        from ..values import sv_int
        return {"stored": sv_int(stored)}

    def op_query(self, args, ctx):
        kw = {}
        for k in ("since_ms", "until_ms"):
            if k in args:
                kw[k] = args[k].value
        if "severity_at_least" in args:
            kw["severity_at_least"] = args["severity_at_least"].value
        if "source_prefix" in args:
            kw["source_prefix"] = args["source_prefix"].value
        if "text_contains" in args:
            kw["text_contains"] = args["text_contains"].value
        records = self.service.query(**kw)
        return {"records": sv_text(canonical_json([r.to_json() for r in records]))}

    def op_record_history(self, args, ctx):
        ev = self.service.record_history(args["component"].value, args["kind"].value,
                                         json.loads(args["data"].value))
        from ..values import sv_int
        return {"seq": sv_int(ev.seq)}

    def op_usage_report(self, args, ctx):
        return {"report": sv_text(canonical_json(
            self.service.usage_report(args["component"].value)))}

    def op_history_query(self, args, ctx):
        kind = args["kind"].value if "kind" in args else None
        component = args["component"].value if "component" in args else ""
        events = self.service.history_events(component, kind)
        return {"events": sv_text(canonical_json([e.to_json() for e in events]))}

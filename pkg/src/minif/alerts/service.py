"""Alert service: raise, present, respond, audit.

Raising must never fail: alerts live in memory first and the persistence
writes ride a retry queue that drains when the broker comes back. A raiser
blocks on its wait handle until an operator (human or scripted) responds.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..clock import Clock, WALL
from ..errors import MinifError
from ..values import (StatusValue, canonical_json, sv_enum, sv_int, sv_text)
from ..wirebus.node import OpServant

log = logging.getLogger(__name__)

SERVICE_NAME = "svc.alert"
TOPIC_RAISED = "alert.raised"
TOPIC_RESPONDED = "alert.responded"
TOPIC_FATAL = "alert.fatal"
SEVERITIES = ("info", "warning", "serious", "fatal")
PERSIST_QUEUE_LIMIT = 4096


class UnknownAlert(MinifError):
    pass


class AlreadyResponded(MinifError):
    pass


class BadChoice(MinifError):
    pass


@dataclass
class Alert:
    id: int
    severity: str
    source: str
    text: str
    options: list[str]
    state: str = "raised"                       # raised | presented | responded
    raised_at: int = 0
    presented_at: Optional[int] = None
    responded_at: Optional[int] = None
    response: Optional[tuple[str, str]] = None  # (choice, operator)

    def to_json(self) -> dict:
        return {"id": self.id, "severity": self.severity, "source": self.source,
                "text": self.text, "options": self.options, "state": self.state,
                "raised_at": self.raised_at, "presented_at": self.presented_at,
                "responded_at": self.responded_at,
                "response": list(self.response) if self.response else None}

    def to_payload(self) -> dict[str, StatusValue]:
        return {"blob": sv_text(canonical_json(self.to_json()))}

    @classmethod
    def from_payload(cls, payload: dict[str, StatusValue]) -> "Alert":
        obj = json.loads(payload["blob"].value)
        response = tuple(obj["response"]) if obj.get("response") else None
        return cls(id=obj["id"], severity=obj["severity"], source=obj["source"],
                   text=obj["text"], options=list(obj["options"]), state=obj["state"],
                   raised_at=obj["raised_at"], presented_at=obj.get("presented_at"),
                   responded_at=obj.get("responded_at"), response=response)


class AlertService:
    def __init__(self, store=None, clock: Clock = WALL,
                 publish: Callable[[str, dict], None] | None = None):
        self.store = store
        self.clock = clock
        self._publish = publish
        self._alerts: dict[int, Alert] = {}
        self._next_id = 1
        self._tx_seq: dict[int, int] = {}
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._retry: deque = deque()
        if store is not None:
            self._recover()

    def _recover(self):
        try:
            for rec in self.store.load_class("alert"):
                alert = Alert.from_payload(rec.payload)
                self._alerts[alert.id] = alert
                self._next_id = max(self._next_id, alert.id + 1)
            for rec in self.store.load_class("alerttx"):
                alert_id = int(rec.id.split(".")[0])
                seq = int(rec.id.split(".")[1])
                self._tx_seq[alert_id] = max(self._tx_seq.get(alert_id, 0), seq)
        except MinifError as e:
            log.warning("alert recovery degraded: %s", e)

    # -- resilient persistence -------------------------------------------

    def _persist(self, cls: str, rid: str, payload: dict[str, StatusValue]):
        if self.store is None:
            return
        self._retry.append((cls, rid, payload))
        self.flush_persistence()

    def flush_persistence(self) -> int:
        """Drain queued writes; safe to call from a timer. Returns backlog."""
        while self._retry:
            cls, rid, payload = self._retry[0]
            try:
                self.store.put(cls, rid, payload)
            except MinifError as e:
                log.warning("alert persistence deferred (%s); %d queued",
                            e, len(self._retry))
                while len(self._retry) > PERSIST_QUEUE_LIMIT:
                    self._retry.popleft()
                return len(self._retry)
            self._retry.popleft()
        return 0

    def _tx(self, alert: Alert, action: str, extra: dict | None = None):
        seq = self._tx_seq.get(alert.id, 0) + 1
        self._tx_seq[alert.id] = seq
        body = {"alert_id": alert.id, "action": action, "ts": self.clock.now_ms(),
                "severity": alert.severity, "source": alert.source}
        body.update(extra or {})
        self._persist("alerttx", f"{alert.id:08d}.{seq}",
                      {"blob": sv_text(canonical_json(body))})

    # -- operations --------------------------------------------------------

    def raise_alert(self, severity: str, source: str, text: str,
                    options: list[str] | None = None) -> int:
        options = list(options) if options else ["acknowledge"]
        if severity not in SEVERITIES:
            severity = "serious"
        if not options:
            options = ["acknowledge"]
        with self._lock:
            alert = Alert(id=self._next_id, severity=severity, source=source,
                          text=text, options=options,
                          raised_at=self.clock.now_ms())
            self._next_id += 1
            self._alerts[alert.id] = alert
            self._persist("alert", f"{alert.id:08d}", alert.to_payload())
            self._tx(alert, "raise")
        if self._publish is not None:
            payload = {"id": alert.id, "severity": severity, "source": source,
                       "text": text, "options": canonical_json(options)}
            self._publish(TOPIC_RAISED, payload)
            if severity == "fatal":
                self._publish(TOPIC_FATAL, payload)
        return alert.id

    def respond(self, alert_id: int, choice: str, operator: str) -> None:
        with self._lock:
            alert = self._alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(str(alert_id))
            if alert.state == "responded":
                raise AlreadyResponded(str(alert_id))
            if choice not in alert.options:
                raise BadChoice(f"{choice!r} not in {alert.options}")
            alert.state = "responded"
            alert.responded_at = self.clock.now_ms()
            alert.response = (choice, operator)
            self._persist("alert", f"{alert.id:08d}", alert.to_payload())
            self._tx(alert, "respond", {"choice": choice, "operator": operator})
            self._cond.notify_all()
        if self._publish is not None:
            self._publish(TOPIC_RESPONDED, {"id": alert_id, "choice": choice,
                                            "operator": operator})

    def wait(self, alert_id: int, timeout_s: float | None = None) -> str:
        """Block until the alert is responded; returns the chosen label."""
        import time
        deadline = None if timeout_s is None else time.monotonic() + timeout_s
        with self._lock:
            while True:
                alert = self._alerts.get(alert_id)
                if alert is None:
                    raise UnknownAlert(str(alert_id))
                if alert.state == "responded":
                    return alert.response[0]
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    raise TimeoutError(f"alert {alert_id} unanswered")
                self._cond.wait(remaining)

    def pending(self, mark_presented: bool = True) -> list[Alert]:
        """Unresponded alerts, oldest first. Fetching presents them."""
        with self._lock:
            out = sorted((a for a in self._alerts.values() if a.state != "responded"),
                         key=lambda a: a.id)
            if mark_presented:
                for alert in out:
                    if alert.state == "raised":
                        alert.state = "presented"
                        alert.presented_at = self.clock.now_ms()
                        self._persist("alert", f"{alert.id:08d}", alert.to_payload())
                        self._tx(alert, "present")
            return [Alert(**{**a.__dict__}) for a in out]

    def get(self, alert_id: int) -> Alert:
        with self._lock:
            alert = self._alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(str(alert_id))
            return Alert(**{**alert.__dict__})

    def history(self, since_ms: int | None = None, until_ms: int | None = None,
                severity: str | None = None, source_prefix: str = "") -> list[dict]:
        """Raise/present/respond transactions from the persistent store."""
        if self.store is None:
            return []
        out = []
        for rec in self.store.load_class("alerttx"):
            tx = json.loads(rec.payload["blob"].value)
            if since_ms is not None and tx["ts"] < since_ms:
                continue
            if until_ms is not None and tx["ts"] > until_ms:
                continue
            if severity is not None and tx["severity"] != severity:
                continue
            if not tx["source"].startswith(source_prefix):
                continue
            out.append(tx)
        out.sort(key=lambda tx: (tx["alert_id"], tx["ts"]))
        return out


class AlertServant(OpServant):
    def __init__(self, service: AlertService):
        self.service = service

    def op_raise(self, args, ctx):
        options = json.loads(args["options"].value) if "options" in args else None
        alert_id = self.service.raise_alert(args["severity"].value,
                                            args["source"].value,
                                            args["text"].value, options)
        return {"id": sv_int(alert_id)}

    def op_respond(self, args, ctx):
        self.service.respond(args["id"].value, args["choice"].value,
                             args["operator"].value)
        return {}

    def op_pending(self, args, ctx):
        mark = args.get("present")
        alerts = self.service.pending(mark.value if mark is not None else True)
        return {"alerts": sv_text(canonical_json([a.to_json() for a in alerts]))}

    def op_get(self, args, ctx):
        return {"alert": sv_text(canonical_json(
            self.service.get(args["id"].value).to_json()))}

    def op_history(self, args, ctx):
        kw = {}
        if "since_ms" in args:
            kw["since_ms"] = args["since_ms"].value
        if "until_ms" in args:
            kw["until_ms"] = args["until_ms"].value
        if "severity" in args:
            kw["severity"] = args["severity"].value
        if "source_prefix" in args:
            kw["source_prefix"] = args["source_prefix"].value
        return {"transactions": sv_text(canonical_json(self.service.history(**kw)))}

"""Alert client plumbing: bus access, wait handles, scripted operators."""

from __future__ import annotations

import json
import logging
import threading

from ..errors import RemoteError, typed_error
from ..values import canonical_json
from .service import SERVICE_NAME, TOPIC_RAISED, TOPIC_RESPONDED, Alert

log = logging.getLogger(__name__)


class AlertWaitHandle:
    """Completes when the alert is responded; fed by alert.responded events."""

    def __init__(self, alert_id: int):
        self.alert_id = alert_id
        self._event = threading.Event()
        self.choice: str | None = None
        self.operator: str | None = None

    def complete(self, choice: str, operator: str):
        self.choice = choice
        self.operator = operator
        self._event.set()

    @property
    def ready(self) -> bool:
        return self._event.is_set()

    def wait(self, timeout_s: float | None = None) -> str:
        if not self._event.wait(timeout_s):
            raise TimeoutError(f"alert {self.alert_id} unanswered")
        return self.choice


class AlertClient:
    """Bus-side face of the alert service, one per interested process."""

    def __init__(self, node, timeout_ms: int = 5000):
        self.node = node
        self.timeout_ms = timeout_ms
        self._handles: dict[int, AlertWaitHandle] = {}
        self._lock = threading.Lock()
        self._sub = node.subscribe(TOPIC_RESPONDED, self._on_responded)

    def _on_responded(self, topic, args):
        with self._lock:
            handle = self._handles.pop(args["id"].value, None)
        if handle is not None:
            handle.complete(args["choice"].value, args["operator"].value)

    def _invoke(self, op, args):
        try:
            return self.node.invoke(SERVICE_NAME, op, args, timeout_ms=self.timeout_ms)
        except RemoteError as e:
            raise typed_error(e.code, e.detail) from None

    def raise_alert(self, severity: str, source: str, text: str,
                    options=None) -> AlertWaitHandle:
        args = {"severity": severity, "source": source, "text": text}
        if options:
            args["options"] = canonical_json(list(options))
        alert_id = self._invoke("raise", args)["id"].value
        handle = AlertWaitHandle(alert_id)
        with self._lock:
            self._handles[alert_id] = handle
        # the responded event may have beaten us; reconcile from the service
        alert = self.get(alert_id)
        if alert.state == "responded" and not handle.ready:
            handle.complete(*alert.response)
        return handle

    def respond(self, alert_id: int, choice: str, operator: str) -> None:
        self._invoke("respond", {"id": alert_id, "choice": choice, "operator": operator})

    def pending(self, present: bool = True) -> list[Alert]:
        out = self._invoke("pending", {"present": present})
        return [_alert_from_json(a) for a in json.loads(out["alerts"].value)]

    def get(self, alert_id: int) -> Alert:
        return _alert_from_json(json.loads(self._invoke("get", {"id": alert_id})["alert"].value))

    def history(self, **kw) -> list[dict]:
        return json.loads(self._invoke("history", kw)["transactions"].value)

    def close(self):
        self._sub.cancel()


def _alert_from_json(obj: dict) -> Alert:
    response = tuple(obj["response"]) if obj.get("response") else None
    return Alert(id=obj["id"], severity=obj["severity"], source=obj["source"],
                 text=obj["text"], options=list(obj["options"]), state=obj["state"],
                 raised_at=obj["raised_at"], presented_at=obj.get("presented_at"),
                 responded_at=obj.get("responded_at"), response=response)


class ScriptedOperator:
    """Answers alerts from a canned script so suites run with no console.

    Script entries: {"match": substring (optional), "choice": label
    (optional; defaults to the first option), "delay_ms": int}. Entries are
    consumed in order; an unmatched alert falls through to defaults.
    """

    def __init__(self, service=None, script=None, operator: str = "scripted-operator"):
        self.service = service
        self.script = list(script or [])
        self.operator = operator
        self.answered: list[tuple[int, str]] = []
        self._lock = threading.Lock()

    def attach_bus(self, node, client: AlertClient):
        self._client = client
        return node.subscribe(TOPIC_RAISED, lambda t, a: self.on_alert_args(a))

    def on_alert_args(self, args):
        self.on_alert(args["id"].value, args["text"].value,
                      json.loads(args["options"].value))

    def _pick(self, text: str, options: list[str]) -> tuple[str, int]:
        with self._lock:
            for i, entry in enumerate(self.script):
                match = entry.get("match")
                if match is None or match in text:
                    self.script.pop(i)
                    choice = entry.get("choice") or (options[0] if options else "acknowledge")
                    return choice, entry.get("delay_ms", 0)
        return (options[0] if options else "acknowledge"), 0

    def on_alert(self, alert_id: int, text: str, options: list[str]):
        choice, delay_ms = self._pick(text, options)
        if choice not in options and options:
            choice = options[0]

        def answer():
            backend = self.service if self.service is not None else self._client
            try:
                # fetch through pending() so the presented transition happens,
                # exactly as a console would
                backend.pending(True)
                backend.respond(alert_id, choice, self.operator)
                self.answered.append((alert_id, choice))
            except Exception as e:  # noqa: BLE001 - scripted runs must not wedge
                log.warning("scripted operator could not respond to %s: %s", alert_id, e)

        if delay_ms > 0:
            threading.Timer(delay_ms / 1000.0, answer).start()
        else:
            answer()

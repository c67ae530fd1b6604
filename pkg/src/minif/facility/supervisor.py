"""Supervisor executable: hosts the central services, the shot coordinator,
the sequence runner, the status mirror, and the operator gateway."""

from __future__ import annotations

import json
import logging
import threading

from ..alerts import AlertServant, AlertService, ScriptedOperator
from ..devices.core import MONITORED_FIELDS, OP_SIGNATURES
from ..logsvc import LogServant, LogService, SensorSampler
from ..persist import BrokerClient
from ..reserve import ReservationService
from ..reserve.service import ReserveServant
from ..scl import (ClientAlertBackend, Engine, Execution, SclContext,
                   ServiceAlertBackend, SimpleCatalog, parse_sequence, validate)
from ..shotseq import ShotCoordinator, ShotServant
from ..statmon import StatusMirror
from ..sysmgr.service import SERVICE_NAME as SYSMGR
from ..values import canonical_json, sv_text, wrap
from ..wirebus.node import OpServant
from .procbase import FacilityConfig, ProcServant, ProcessApp

log = logging.getLogger(__name__)


class SupervisorApp(ProcessApp):
    def __init__(self, config: FacilityConfig, with_gateway: bool = True):
        super().__init__("supervisor", config)
        self.with_gateway = with_gateway
        self.store = BrokerClient(self.node, config.persist_partition)
        self._local_listeners = []
        self.mirror: StatusMirror | None = None
        self.reserve: ReservationService | None = None
        self.alerts: AlertService | None = None
        self.logsvc: LogService | None = None
        self.coordinator: ShotCoordinator | None = None
        self.sequences: SequenceRunner | None = None
        self.sampler: SensorSampler | None = None
        self.gateway_server = None

    def tee_publish(self, topic: str, payload: dict):
        self.node.publish(topic, payload)
        for cb in list(self._local_listeners):
            try:
                cb(topic, payload)
            except Exception:  # noqa: BLE001
                log.exception("local event listener failed")

    def add_local_listener(self, cb):
        self._local_listeners.append(cb)

    def start(self):
        self.retry(lambda: self.store.ping(), "persistence broker")
        self.mirror = StatusMirror(self.node)
        self.logsvc = LogService(store=self.store)
        self.reserve = ReservationService(
            store=self.store, publish=self.tee_publish,
            audit=self._audit_reservation, taxon_exists=self._taxon_known)
        self.alerts = AlertService(store=self.store, publish=self.tee_publish)
        self.coordinator = ShotCoordinator(invoke=self.node.invoke,
                                           store=self.store,
                                           publish=self.tee_publish)
        self.sequences = SequenceRunner(self)
        self.node.register_many([
            ("svc.reserve", ReserveServant(self.reserve)),
            ("svc.alert", AlertServant(self.alerts)),
            ("svc.log", LogServant(self.logsvc)),
            ("svc.shot", ShotServant(self.coordinator)),
            ("svc.seq", SeqServant(self.sequences)),
            ("proc.supervisor", ProcServant(self)),
        ])
        self.node.subscribe("alert.fatal", self._on_fatal_alert)
        self.sampler = SensorSampler(self.mirror.snapshot,
                                     self.logsvc.record_history,
                                     period_ms=self.config.sampler_period_ms,
                                     prefix=self.config.sampler_prefix).run_wall()
        self.start_heartbeats()
        self._spawn(self._flush_loop, "alert-flush")
        if self.with_gateway:
            from .gateway import serve_gateway
            self.gateway_server = serve_gateway(self, self.config.http_port)
        self.logc.log("info", "supervisor", "up",
                      panels=",".join(self.config.panels))
        log.info("supervisor up; gateway %s",
                 f"on :{self.config.http_port}" if self.with_gateway else "off")
        return self

    def _taxon_known(self, taxon: str) -> bool:
        try:
            return self.node.name_exists(taxon)
        except Exception:  # noqa: BLE001
            return True       # never let a hub blip block reservations

    def _audit_reservation(self, record: dict):
        attrs = {k: v for k, v in record.items() if k != "op"}
        self.logsvc.append([{"severity": "info", "source": "svc.reserve",
                             "text": f"reserve.{record['op']}", "attrs": attrs}])

    def _on_fatal_alert(self, topic, args):
        from ..shotseq import NoActiveShot
        try:
            alert_id = args["id"].value
            self.coordinator.abort(f"fatal alert {alert_id}")
            log.warning("shot aborted by fatal alert %s", alert_id)
        except NoActiveShot:
            pass
        except Exception:  # noqa: BLE001
            log.exception("fatal-alert abort failed")

    def _flush_loop(self):
        while not self._stop.wait(0.5):
            try:
                self.alerts.flush_persistence()
            except Exception:  # noqa: BLE001
                pass

    def catalog(self) -> SimpleCatalog:
        ops, fields = {}, {}
        for rec in self.store.load_class("devrec"):
            kind = rec.payload["kind"].value
            if kind in OP_SIGNATURES:
                ops[rec.id] = OP_SIGNATURES[kind]
                fields[rec.id] = MONITORED_FIELDS[kind]
        return SimpleCatalog(ops, fields)

    def shutdown(self):
        if self.sampler is not None:
            self.sampler.stop()
        if self.gateway_server is not None:
            self.gateway_server.should_exit = True
        super().shutdown()


class SequenceRunner:
    """Runs sequence documents in the supervisor on the wall clock.

    Step targets are reserved as a group for the duration of the run and
    released afterwards; a per-run scripted operator (when supplied) answers
    only alerts raised by its own execution."""

    def __init__(self, app: SupervisorApp):
        self.app = app
        self._executions: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._seq = 0

    def run(self, xml: str, operator_script=None, operator: str = "console",
            timeout_step_ms: int = 10_000) -> str:
        doc = parse_sequence(xml)
        catalog = self.app.catalog()
        issues = validate(doc, catalog)
        if issues:
            from ..scl.engine import ValidationFailed
            raise ValidationFailed(canonical_json(
                [{"path": i.path, "line": i.line, "kind": i.kind,
                  "message": i.message} for i in issues]))
        with self._lock:
            self._seq += 1
            exec_id = f"{doc.name}-{self._seq:04d}"
        source = f"scl.{exec_id}"
        targets = sorted({n.target for n, _ in doc.walk()
                          if type(n).__name__ == "Step"})
        keys = {}
        if targets:
            key = self.app.reserve.reserve_group(targets, holder=operator)
            keys = {t: key for t in targets}

        if operator_script:
            scripted = ScriptedOperator(service=self.app.alerts,
                                        script=operator_script,
                                        operator=f"script:{operator}")

            def on_local(topic, payload):
                if topic == "alert.raised" and payload.get("source") == source:
                    scripted.on_alert(payload["id"], payload["text"],
                                      json.loads(payload["options"]))

            self.app.add_local_listener(on_local)

        def bus_invoke(target, op, args, key=None, timeout_ms=timeout_step_ms):
            return self.app.node.invoke(target, op,
                                        {k: wrap(v) for k, v in (args or {}).items()},
                                        key=key, timeout_ms=timeout_ms)

        ctx = SclContext(invoke=bus_invoke,
                         snapshot=lambda ch: self.app.mirror.get(ch),
                         alerts=ServiceAlertBackend(self.app.alerts),
                         keys=keys, source=source,
                         persist_trace=self._persist_trace)
        execution = Execution(Engine(ctx), doc)
        entry = {"execution": execution, "keys": keys, "operator": operator,
                 "xml": xml}
        with self._lock:
            self._executions[exec_id] = entry

        def finalize():
            try:
                execution._thread.join()
            finally:
                if keys:
                    try:
                        self.app.reserve.release(next(iter(keys.values())))
                    except Exception:  # noqa: BLE001 - released or broken already
                        pass

        execution.start()
        threading.Thread(target=finalize, name=f"seq-fin-{exec_id}",
                         daemon=True).start()
        return exec_id

    def _persist_trace(self, trace_id: str, canonical: str):
        try:
            self.app.store.put("trace", trace_id, {"blob": sv_text(canonical)})
        except Exception:  # noqa: BLE001
            log.warning("trace persistence failed for %s", trace_id)

    def status(self, exec_id: str) -> dict:
        with self._lock:
            entry = self._executions.get(exec_id)
        if entry is None:
            from ..errors import MinifError
            raise MinifError(f"unknown execution {exec_id}")
        execution = entry["execution"]
        out = {"exec_id": exec_id, "running": execution.running,
               "paused_on": execution.paused_on}
        trace = execution.trace if not execution.running else None
        if trace is not None:
            out["outcome"] = trace.outcome
            out["trace"] = json.loads(trace.canonical())
        if execution.paused_on is not None:
            alert = self.app.alerts.get(execution.paused_on)
            out["alert"] = alert.to_json()
        return out

    def resume(self, exec_id: str, choice: str, operator: str) -> None:
        with self._lock:
            entry = self._executions.get(exec_id)
        if entry is None:
            from ..errors import MinifError
            raise MinifError(f"unknown execution {exec_id}")
        entry["execution"].resume(choice, operator)

    def list_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._executions)


class SeqServant(OpServant):
    def __init__(self, runner: SequenceRunner):
        self.runner = runner

    def op_run(self, args, ctx):
        script = json.loads(args["operator_script"].value) \
            if "operator_script" in args else None
        operator = args["operator"].value if "operator" in args else "bus"
        exec_id = self.runner.run(args["xml"].value, script, operator)
        return {"exec_id": sv_text(exec_id)}

    def op_status(self, args, ctx):
        return {"status": sv_text(canonical_json(
            self.runner.status(args["exec_id"].value)))}

    def op_resume(self, args, ctx):
        operator = args["operator"].value if "operator" in args else "bus"
        self.runner.resume(args["exec_id"].value, args["choice"].value, operator)
        return {}


def main(args, config: FacilityConfig):
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    app = SupervisorApp(config, with_gateway=not getattr(args, "no_gateway", False))
    try:
        app.start()
    except Exception:
        log.exception("supervisor start-up failed")
        raise SystemExit(1)
    app.run_forever()

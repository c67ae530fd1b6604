"""Sequence execution.

Determinism contract: under a stepped clock and a scripted operator, two
runs of one document produce byte-identical canonical traces. The trick is
the tick gate: simulated time advances only while every live branch is
parked in a wait, steps take zero simulated time, and waiters wake in node
-path order. Wall-clock mode drops the gate and polls instead.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..clock import Clock, SimClock, WALL
from ..errors import MinifError, RemoteError
from ..values import canonical_json, plain, unwrap
from .doc import (Parallel, RaiseAlert, Repeat, Select, SequenceDoc, Step,
                  WaitFor)
from .validate import validate

log = logging.getLogger(__name__)

ABORT_OPTION = "abort-sequence"
PARALLEL_LIMIT = 16


class StepFailed(MinifError):
    pass


class WaitTimeout(MinifError):
    pass


class OperatorAbort(MinifError):
    pass


class NotPaused(MinifError):
    pass


class ValidationFailed(MinifError):
    pass


# -- deterministic scheduler -------------------------------------------------

class _GateWaiter:
    __slots__ = ("pred", "deadline", "order_key", "event", "fired")

    def __init__(self, pred, deadline, order_key):
        self.pred = pred
        self.deadline = deadline
        self.order_key = order_key
        self.event = threading.Event()
        self.fired = False


class TickGate:
    """Advances a SimClock in fixed ticks, but only when every registered
    branch is blocked in wait(); wakes satisfied waiters in order-key order."""

    def __init__(self, clock: SimClock, on_tick: Callable[[float], None],
                 tick_ms: int = 50):
        self.clock = clock
        self.on_tick = on_tick
        self.tick_ms = tick_ms
        self._cond = threading.Condition()
        self._registered = 0
        self._waiters: list[_GateWaiter] = []
        self._stopped = False
        self._pump = threading.Thread(target=self._pump_loop, name="tick-gate",
                                      daemon=True)
        self._pump.start()

    def register_branch(self):
        with self._cond:
            self._registered += 1
            self._cond.notify_all()

    def unregister_branch(self):
        with self._cond:
            self._registered -= 1
            self._cond.notify_all()

    def wait(self, pred, timeout_ms: int | None, order_key: str) -> bool:
        """Park until pred holds (True) or the sim deadline passes (False)."""
        deadline = None if timeout_ms is None else self.clock.now_ms() + timeout_ms
        waiter = _GateWaiter(pred, deadline, order_key)
        with self._cond:
            self._waiters.append(waiter)
            self._cond.notify_all()
        waiter.event.wait()
        return waiter.fired

    def _all_parked(self) -> bool:
        return self._registered > 0 and len(self._waiters) >= self._registered

    def _fire_satisfied(self) -> bool:
        fired_any = False
        now = self.clock.now_ms()
        for waiter in sorted(self._waiters, key=lambda w: w.order_key):
            try:
                satisfied = waiter.pred()
            except Exception:
                log.exception("gate predicate failed; treating as timeout")
                satisfied = False
            if satisfied:
                waiter.fired = True
            elif waiter.deadline is not None and now >= waiter.deadline:
                waiter.fired = False
            else:
                continue
            self._waiters.remove(waiter)
            waiter.event.set()
            fired_any = True
        return fired_any

    def _pump_loop(self):
        while True:
            with self._cond:
                if self._stopped:
                    for waiter in self._waiters:
                        waiter.event.set()
                    return
                if not self._all_parked():
                    self._cond.wait(0.005)
                    continue
                if self._fire_satisfied():
                    continue
            # everyone is parked and nobody can fire: move time forward
            self.clock.advance(self.tick_ms)
            try:
                self.on_tick(self.tick_ms / 1000.0)
            except Exception:
                log.exception("tick callback failed")
            with self._cond:
                fired = self._fire_satisfied()
            if not fired:
                # wall pacing only; simulated behavior is tick-count driven
                threading.Event().wait(0.0002)

    def stop(self):
        with self._cond:
            self._stopped = True
            self._cond.notify_all()


# -- alert backends -----------------------------------------------------------

class _ServiceHandle:
    def __init__(self, service, alert_id: int):
        self.service = service
        self.alert_id = alert_id

    @property
    def ready(self) -> bool:
        return self.service.get(self.alert_id).state == "responded"

    @property
    def choice(self) -> str:
        return self.service.get(self.alert_id).response[0]

    def wait(self, timeout_s: float | None = None) -> str:
        return self.service.wait(self.alert_id, timeout_s)


class ServiceAlertBackend:
    """In-process alert service."""

    def __init__(self, service):
        self.service = service

    def raise_alert(self, severity, source, text, options):
        alert_id = self.service.raise_alert(severity, source, text, options)
        return _ServiceHandle(self.service, alert_id)

    def respond(self, alert_id, choice, operator):
        self.service.respond(alert_id, choice, operator)


class ClientAlertBackend:
    """Alert service over the bus."""

    def __init__(self, client):
        self.client = client

    def raise_alert(self, severity, source, text, options):
        return self.client.raise_alert(severity, source, text, options)

    def respond(self, alert_id, choice, operator):
        self.client.respond(alert_id, choice, operator)


# -- trace ---------------------------------------------------------------------

@dataclass
class TraceRecord:
    path: str
    kind: str
    start_ms: int
    end_ms: Optional[int]
    result: str                   # ok | error | skipped
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"path": self.path, "kind": self.kind, "start_ms": self.start_ms,
                "end_ms": self.end_ms, "result": self.result, "detail": self.detail}


@dataclass
class ExecTrace:
    doc_name: str
    records: list = field(default_factory=list)
    outcome: Optional[dict] = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, record: TraceRecord):
        with self._lock:
            self.records.append(record)

    def sorted_records(self) -> list[TraceRecord]:
        with self._lock:
            return sorted(self.records, key=lambda r: r.path)

    def canonical(self) -> str:
        """Deterministic rendering: path-sorted, simulated timestamps only."""
        return canonical_json({"doc": self.doc_name, "outcome": self.outcome,
                               "records": [r.to_json() for r in self.sorted_records()]})


# -- context -------------------------------------------------------------------

@dataclass
class SclContext:
    invoke: Callable                      # invoke(target, op, args, key, timeout_ms)
    snapshot: Callable[[str], object]     # channel -> StatusUpdate | None
    alerts: object                        # ServiceAlertBackend | ClientAlertBackend
    keys: dict = field(default_factory=dict)
    clock: Clock = WALL
    gate: Optional[TickGate] = None
    source: str = "scl"
    persist_trace: Optional[Callable[[str, str], None]] = None
    step_timeout_ms: int = 5000

    def key_for(self, taxon: str) -> Optional[str]:
        if taxon in self.keys:
            return self.keys[taxon]
        return self.keys.get("*")


# -- engine --------------------------------------------------------------------

_CMP = {"eq": lambda a, b: a == b,
        "ge": lambda a, b: a >= b,
        "le": lambda a, b: a <= b}


class Engine:
    def __init__(self, ctx: SclContext):
        self.ctx = ctx
        self.trace: Optional[ExecTrace] = None
        self.blocking_alert_id: Optional[int] = None
        self._exec_seq = 0

    def _now(self) -> int:
        return self.ctx.clock.now_ms()

    def execute(self, doc: SequenceDoc, catalog=None) -> ExecTrace:
        if catalog is not None:
            issues = validate(doc, catalog)
            if issues:
                raise ValidationFailed(canonical_json(
                    [{"path": i.path, "line": i.line, "kind": i.kind,
                      "message": i.message} for i in issues]))
        trace = ExecTrace(doc_name=doc.name)
        self.trace = trace
        gate = self.ctx.gate
        if gate is not None:
            gate.register_branch()
        try:
            self._run_body(doc.body, "", trace)
            trace.outcome = {"outcome": "ok"}
        except OperatorAbort as e:
            trace.outcome = {"outcome": "operator-abort", "detail": e.detail}
        except (StepFailed, WaitTimeout) as e:
            trace.outcome = {"outcome": "error", "detail": f"{e.code}: {e.detail}"}
        finally:
            if gate is not None:
                gate.unregister_branch()
        if self.ctx.persist_trace is not None:
            self._exec_seq += 1
            self.ctx.persist_trace(f"{doc.name}-{self._exec_seq:04d}", trace.canonical())
        return trace

    # -- node runners -------------------------------------------------------

    def _run_body(self, body, prefix, trace):
        for i, node in enumerate(body):
            path = f"{prefix}{i:03d}"
            try:
                self._run_node(node, path, trace)
            except (StepFailed, WaitTimeout, OperatorAbort):
                for j in range(i + 1, len(body)):
                    trace.add(TraceRecord(path=f"{prefix}{j:03d}",
                                          kind=type(body[j]).__name__.lower(),
                                          start_ms=self._now(), end_ms=self._now(),
                                          result="skipped"))
                raise

    def _run_node(self, node, path, trace):
        if isinstance(node, Step):
            self._run_step(node, path, trace)
        elif isinstance(node, Repeat):
            self._run_repeat(node, path, trace)
        elif isinstance(node, Parallel):
            self._run_parallel(node, path, trace)
        elif isinstance(node, WaitFor):
            self._run_waitfor(node, path, trace)
        elif isinstance(node, Select):
            self._run_select(node, path, trace)
        elif isinstance(node, RaiseAlert):
            self._run_raisealert(node, path, trace)
        else:
            raise StepFailed(f"unknown node at {path}")

    def _run_step(self, node: Step, path, trace):
        start = self._now()
        try:
            result = self.ctx.invoke(node.target, node.op, node.args,
                                     key=self.ctx.key_for(node.target),
                                     timeout_ms=self.ctx.step_timeout_ms)
        except (RemoteError, MinifError) as e:
            detail = f"{getattr(e, 'code', 'Error')}: {e.detail}"
            trace.add(TraceRecord(path=path, kind="step", start_ms=start,
                                  end_ms=self._now(), result="error",
                                  detail={"target": node.target, "op": node.op,
                                          "error": detail}))
            raise StepFailed(f"{node.target}.{node.op}: {detail}") from None
        trace.add(TraceRecord(path=path, kind="step", start_ms=start,
                              end_ms=self._now(), result="ok",
                              detail={"target": node.target, "op": node.op,
                                      "result": plain(result or {})}))

    def _run_repeat(self, node: Repeat, path, trace):
        start = self._now()
        try:
            for iteration in range(node.count):
                self._run_body(node.body, f"{path}/i{iteration:04d}/", trace)
        except (StepFailed, WaitTimeout, OperatorAbort):
            trace.add(TraceRecord(path=path, kind="repeat", start_ms=start,
                                  end_ms=self._now(), result="error",
                                  detail={"count": node.count}))
            raise
        trace.add(TraceRecord(path=path, kind="repeat", start_ms=start,
                              end_ms=self._now(), result="ok",
                              detail={"count": node.count}))

    def _run_parallel(self, node: Parallel, path, trace):
        start = self._now()
        gate = self.ctx.gate
        limiter = threading.Semaphore(PARALLEL_LIMIT)
        outcomes: dict[int, Exception | None] = {}
        threads = []

        def run_branch(b: int, branch):
            with limiter:
                try:
                    self._run_body(branch, f"{path}/b{b:02d}/", trace)
                    outcomes[b] = None
                except (StepFailed, WaitTimeout, OperatorAbort) as e:
                    outcomes[b] = e
                finally:
                    if gate is not None:
                        gate.unregister_branch()

        # branches register before their threads exist so the gate can
        # never sneak a tick in while they are still starting up
        if gate is not None:
            for _ in node.branches:
                gate.register_branch()
        for b, branch in enumerate(node.branches):
            t = threading.Thread(target=run_branch, args=(b, branch),
                                 name=f"scl-{path}-b{b}", daemon=True)
            threads.append(t)
            t.start()
        if gate is not None:
            gate.wait(lambda: all(not t.is_alive() for t in threads), None, path)
        for t in threads:
            t.join()
        failures = {b: e for b, e in outcomes.items() if e is not None}
        if failures:
            trace.add(TraceRecord(path=path, kind="parallel", start_ms=start,
                                  end_ms=self._now(), result="error",
                                  detail={"failed_branches": sorted(failures)}))
            aborts = [e for e in failures.values() if isinstance(e, OperatorAbort)]
            if aborts:
                raise aborts[0]
            first = failures[sorted(failures)[0]]
            raise StepFailed(f"parallel branch failed: {first.detail}") from None
        trace.add(TraceRecord(path=path, kind="parallel", start_ms=start,
                              end_ms=self._now(), result="ok",
                              detail={"branches": len(node.branches)}))

    def _waitfor_pred(self, node: WaitFor):
        channel = f"{node.target}.{node.field}"
        want = unwrap(node.value)
        op = _CMP[node.cmp]

        def pred():
            update = self.ctx.snapshot(channel)
            if update is None:
                return False
            return op(unwrap(update.value), want)

        return channel, pred

    def _run_waitfor(self, node: WaitFor, path, trace):
        start = self._now()
        channel, pred = self._waitfor_pred(node)
        if self.ctx.gate is not None:
            ok = self.ctx.gate.wait(pred, node.timeout_ms, path)
        else:
            ok = self._poll_wall(pred, node.timeout_ms)
        update = self.ctx.snapshot(channel)
        final = unwrap(update.value) if update is not None else None
        if not ok:
            trace.add(TraceRecord(path=path, kind="waitfor", start_ms=start,
                                  end_ms=self._now(), result="error",
                                  detail={"channel": channel, "cmp": node.cmp,
                                          "value": unwrap(node.value),
                                          "last": final, "error": "timeout"}))
            raise WaitTimeout(f"{channel} {node.cmp} {unwrap(node.value)}")
        trace.add(TraceRecord(path=path, kind="waitfor", start_ms=start,
                              end_ms=self._now(), result="ok",
                              detail={"channel": channel, "cmp": node.cmp,
                                      "value": unwrap(node.value), "final": final}))

    def _poll_wall(self, pred, timeout_ms) -> bool:
        import time
        deadline = time.monotonic() + timeout_ms / 1000.0
        while time.monotonic() < deadline:
            if pred():
                return True
            time.sleep(0.01)
        return pred()

    def _await_alert(self, handle, path) -> str:
        self.blocking_alert_id = handle.alert_id
        try:
            if self.ctx.gate is not None:
                self.ctx.gate.wait(lambda: handle.ready, None, path)
                return handle.choice
            return handle.wait(None)
        finally:
            self.blocking_alert_id = None

    def _run_select(self, node: Select, path, trace):
        start = self._now()
        labels = list(node.choices)
        options = labels + [ABORT_OPTION]
        handle = self.ctx.alerts.raise_alert(
            "info", self.ctx.source, node.prompt, options)
        choice = self._await_alert(handle, path)
        if choice == ABORT_OPTION:
            trace.add(TraceRecord(path=path, kind="select", start_ms=start,
                                  end_ms=self._now(), result="error",
                                  detail={"prompt": node.prompt, "choice": choice}))
            raise OperatorAbort(node.prompt)
        self._run_body(node.choices[choice], f"{path}/c-{choice}/", trace)
        trace.add(TraceRecord(path=path, kind="select", start_ms=start,
                              end_ms=self._now(), result="ok",
                              detail={"prompt": node.prompt, "choice": choice}))

    def _run_raisealert(self, node: RaiseAlert, path, trace):
        start = self._now()
        options = list(node.options)
        if ABORT_OPTION not in options:
            options.append(ABORT_OPTION)
        handle = self.ctx.alerts.raise_alert(node.severity, self.ctx.source,
                                             node.text, options)
        choice = self._await_alert(handle, path)
        if choice == ABORT_OPTION:
            trace.add(TraceRecord(path=path, kind="raisealert", start_ms=start,
                                  end_ms=self._now(), result="error",
                                  detail={"text": node.text, "choice": choice}))
            raise OperatorAbort(node.text)
        trace.add(TraceRecord(path=path, kind="raisealert", start_ms=start,
                              end_ms=self._now(), result="ok",
                              detail={"text": node.text, "choice": choice}))


class Execution:
    """A running execute() on its own thread, with the resume() surface."""

    def __init__(self, engine: Engine, doc: SequenceDoc, catalog=None):
        self.engine = engine
        self.doc = doc
        self.catalog = catalog
        self.trace: Optional[ExecTrace] = None
        self.error: Optional[Exception] = None
        self._thread = threading.Thread(target=self._run, name=f"scl-{doc.name}",
                                        daemon=True)

    def _run(self):
        try:
            self.trace = self.engine.execute(self.doc, self.catalog)
        except Exception as e:  # noqa: BLE001 - surfaced via .error
            self.error = e

    def start(self) -> "Execution":
        self._thread.start()
        return self

    def join(self, timeout_s: float | None = None) -> Optional[ExecTrace]:
        self._thread.join(timeout_s)
        if self.error is not None:
            raise self.error
        return self.trace

    @property
    def running(self) -> bool:
        return self._thread.is_alive()

    @property
    def paused_on(self) -> Optional[int]:
        return self.engine.blocking_alert_id

    def resume(self, choice: str, operator: str = "resume") -> None:
        """Exactly respond(): answers the alert the execution is blocked on."""
        alert_id = self.engine.blocking_alert_id
        if not self.running or alert_id is None:
            raise NotPaused("execution is not blocked on an operator")
        self.engine.ctx.alerts.respond(alert_id, choice, operator)

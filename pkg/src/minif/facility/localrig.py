"""Self-contained in-process facility slice: devices, monitor, reservation,
alerts and the sequence engine wired to a stepped clock.

No bus, no processes. This is what `minif-seq run --local` executes and
what deterministic sequence tests build on.
"""

from __future__ import annotations

import threading
from typing import Optional

from ..alerts import AlertService, ScriptedOperator
from ..clock import SimClock
from ..config.records import DeviceRecord
from ..devices import build_device
from ..devices.core import MONITORED_FIELDS, OP_SIGNATURES
from ..errors import MinifError
from ..persist import Store
from ..reserve import ReservationService
from ..scl import Engine, SclContext, ServiceAlertBackend, SimpleCatalog, TickGate
from ..statmon import StatusMonitor
from ..values import StatusValue, attrs, sv_bool, sv_int, sv_real


class _Call:
    def __init__(self, key):
        self.key = key
        self.kind = "req"


class LocalRig:
    def __init__(self, records: list[DeviceRecord] | None = None,
                 operator_script: list[dict] | None = None,
                 store: Optional[Store] = None, tick_ms: int = 50,
                 start_ms: int = 0, auto_operator: bool = True):
        self.clock = SimClock(start_ms=start_ms)
        self.store = store
        self.updates = []
        self.monitor = StatusMonitor(publish=self._on_publish, clock=self.clock)
        self.reserve = ReservationService(clock=self.clock)
        self.operator = ScriptedOperator(script=operator_script or []) \
            if auto_operator else None
        self.alerts = AlertService(store=store, clock=self.clock,
                                   publish=self._on_alert_event)
        if self.operator is not None:
            self.operator.service = self.alerts
        self.devices: dict[str, object] = {}
        self._lock = threading.Lock()
        for record in records if records is not None else default_records():
            self.add_device(record)
        self.gate = TickGate(self.clock, self.tick, tick_ms=tick_ms)

    # -- wiring ------------------------------------------------------------

    def _on_publish(self, topic, payload, retain):
        self.updates.append((topic, payload))

    def _on_alert_event(self, topic, payload):
        if topic == "alert.raised" and self.operator is not None:
            self.operator.on_alert_args({k: v if isinstance(v, StatusValue) else _sv(v)
                                         for k, v in payload.items()})

    def add_device(self, record: DeviceRecord):
        device = build_device(record, self.monitor, validator=self.reserve.validate,
                              clock=self.clock)
        self.devices[record.name] = device
        return device

    def tick(self, dt_s: float):
        for name in sorted(self.devices):
            self.devices[name].sim_tick(dt_s)

    # -- sequence-engine surfaces ----------------------------------------------

    def invoke(self, target, op, args, key=None, timeout_ms=5000):
        device = self.devices.get(target)
        if device is None:
            from ..wirebus.errors import NameNotFound
            raise NameNotFound(target)
        return device.handle(op, dict(args or {}), _Call(key))

    def snapshot(self, channel):
        return self.monitor.snapshot().get(channel)

    def catalog(self) -> SimpleCatalog:
        ops = {name: OP_SIGNATURES[d.kind] for name, d in self.devices.items()}
        fields = {name: MONITORED_FIELDS[d.kind] for name, d in self.devices.items()}
        return SimpleCatalog(ops, fields)

    def reserve_all(self, holder: str = "seq-runner") -> dict[str, str]:
        key = self.reserve.reserve_group(sorted(self.devices), holder)
        return {name: key for name in self.devices}

    def context(self, keys: dict[str, str] | None = None,
                persist_trace=None) -> SclContext:
        return SclContext(invoke=self.invoke, snapshot=self.snapshot,
                          alerts=ServiceAlertBackend(self.alerts),
                          keys=keys if keys is not None else self.reserve_all(),
                          clock=self.clock, gate=self.gate, source="scl.local",
                          persist_trace=persist_trace)

    def engine(self, **kw) -> Engine:
        return Engine(self.context(**kw))

    def close(self):
        self.gate.stop()


def _sv(v):
    from ..values import wrap
    return wrap(v)


def default_records() -> list[DeviceRecord]:
    """A one-beam slice: two motors, a supply, a digitizer, a sensor."""
    return [
        DeviceRecord(name="nif.b001.align.m001", kind="motor", process_id="local",
                     init_attrs=attrs(velocity=5.0, limit_min=0.0, limit_max=100.0,
                                      deadband=0.05)),
        DeviceRecord(name="nif.b001.align.m002", kind="motor", process_id="local",
                     init_attrs=attrs(velocity=2.0, limit_min=0.0, limit_max=50.0,
                                      deadband=0.05)),
        DeviceRecord(name="nif.b001.power.ps001", kind="supply", process_id="local",
                     init_attrs=attrs(limit_v=500.0, ramp_rate=50.0, deadband=0.5)),
        DeviceRecord(name="nif.b001.diag.dg001", kind="digitizer", process_id="local",
                     init_attrs={"seed": sv_int(77)}),
        DeviceRecord(name="nif.b001.diag.sn001", kind="sensor", process_id="local",
                     init_attrs=attrs(base=20.0, amp=2.0, period_s=60.0, noise=0.0,
                                      deadband=0.1, seed=11)),
    ]

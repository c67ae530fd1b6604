"""Device base: reservation gate, status channels, state persistence hooks.

Every state-mutating operation validates its key against the reservation
service before acting; reads stay open. Device physics is deliberately
linear so tests can check kinematics analytically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

from ..clock import Clock, WALL
from ..errors import MinifError
from ..statmon.monitor import StatusMonitor
from ..values import StatusValue, sv_real
from ..wirebus.errors import UnknownOp
from ..config.records import DeviceRecord


class BadAttrs(MinifError):
    pass


class NotReserved(MinifError):
    pass


class WrongKey(MinifError):
    pass


class OutOfLimits(MinifError):
    pass


class OverLimit(MinifError):
    pass


class Aborted(MinifError):
    pass


class BadArgs(MinifError):
    pass


@dataclass
class WaveRecord:
    device: str
    t0: int                   # epoch ms
    dt: float                 # seconds/sample
    samples: tuple[float, ...]

    def to_json(self) -> dict:
        return {"device": self.device, "t0": self.t0, "dt": self.dt,
                "samples": list(self.samples)}

    @classmethod
    def from_json(cls, obj: dict) -> "WaveRecord":
        return cls(device=obj["device"], t0=obj["t0"], dt=obj["dt"],
                   samples=tuple(obj["samples"]))


# validator(taxon, key) -> holder identity or None
KeyValidator = Callable[[str, Optional[str]], Optional[str]]


def _req(attrs: dict[str, StatusValue], name: str, tag: str):
    sv = attrs.get(name)
    if sv is None or sv.tag != tag:
        raise BadAttrs(f"missing/bad attr {name!r} (want {tag})")
    return sv.value


class DeviceCore:
    """Common behavior; subclasses add physics and their op table.

    The device is its own bus servant: handle() maps op names to methods,
    pulling the reservation key from the call context.
    """

    kind = "device"
    # op name -> (method, mutating)
    OPS: dict[str, tuple[str, bool]] = {}

    def __init__(self, record: DeviceRecord, monitor: StatusMonitor,
                 validator: KeyValidator | None = None,
                 persister: Callable[[str, dict], None] | None = None,
                 history: Callable[[str, str, dict], None] | None = None,
                 clock: Clock = WALL):
        if record.kind != self.kind:
            raise BadAttrs(f"record kind {record.kind!r} for a {self.kind}")
        self.record = record
        self.name = record.name
        self.monitor = monitor
        self.validator = validator
        self.persister = persister
        self.history = history
        self.clock = clock
        self.dirty = False
        self._lock = threading.RLock()
        self.status_channels: list[str] = []
        self._init_state(record.init_attrs, record.persisted_state)
        self._register_channels()
        self._publish_initial()

    # subclasses override
    def _init_state(self, init_attrs, persisted): ...
    def _register_channels(self): ...
    def state_payload(self) -> dict[str, StatusValue]:
        return {}

    def sim_tick(self, dt_s: float) -> None:
        pass

    # -- channels ---------------------------------------------------------

    def _channel(self, field: str, tag: str, deadband: float = 0.0,
                 max_interval_ms: int = 10_000):
        channel = f"{self.name}.{field}"
        self.monitor.register_channel(channel, tag, deadband, max_interval_ms)
        self.status_channels.append(channel)

    def _ingest(self, field: str, value):
        self.monitor.ingest(f"{self.name}.{field}", value)

    def _publish_initial(self):
        for channel in self.status_channels:
            field = channel[len(self.name) + 1:]
            self.monitor.ingest(channel, self._status_value(field))

    def _status_value(self, field: str):
        return getattr(self, field)

    # -- reservation gate ---------------------------------------------------

    def _check_key(self, key: Optional[str]):
        if key is None:
            raise NotReserved(self.name)
        if self.validator is None:
            return
        holder = self.validator(self.name, key)
        if holder is None:
            raise WrongKey(self.name)

    # -- persistence ----------------------------------------------------------

    def mark_dirty(self):
        self.dirty = True

    def flush_state(self) -> bool:
        """Hand current state to the persister if anything changed."""
        with self._lock:
            if not self.dirty or self.persister is None:
                return False
            payload = self.state_payload()
            self.dirty = False
        self.persister(self.name, payload)
        return True

    def record_usage(self, data: dict):
        if self.history is not None:
            self.history(self.name, "usage", data)

    # -- bus servant ------------------------------------------------------

    def read_status(self) -> dict[str, StatusValue]:
        with self._lock:
            out = dict(self.state_payload())
        out["kind"] = StatusValue("enum", self.kind)
        return out

    def handle(self, op: str, args: dict[str, StatusValue], ctx):
        if op == "read_status":
            return self.read_status()
        entry = self.OPS.get(op)
        if entry is None:
            raise UnknownOp(f"{self.kind}.{op}")
        method_name, mutating = entry
        key = ctx.key if ctx is not None else None
        if mutating:
            self._check_key(key)
        return getattr(self, method_name)(args)


def build_device(record: DeviceRecord, monitor, validator=None, persister=None,
                 history=None, clock: Clock = WALL) -> DeviceCore:
    from .digitizer import Digitizer
    from .motor import Motor
    from .sensor import Sensor
    from .supply import Supply
    cls = {"motor": Motor, "supply": Supply,
           "digitizer": Digitizer, "sensor": Sensor}.get(record.kind)
    if cls is None:
        raise BadAttrs(f"no device class for kind {record.kind!r}")
    return cls(record, monitor, validator=validator, persister=persister,
               history=history, clock=clock)


DEVICE_KINDS = ("motor", "supply", "digitizer", "sensor")

# bus surface per kind: op -> {arg name: tag}; consumed by sequence validation
OP_SIGNATURES = {
    "motor": {"read_status": {}, "move_to": {"target": "real"}, "halt": {}},
    "supply": {"read_status": {}, "set_voltage": {"volts": "real"},
               "enable": {}, "disable": {}},
    "digitizer": {"read_status": {}, "acquire": {"nsamples": "int", "dt": "real"},
                  "set_shot": {"shot_number": "int"}},
    "sensor": {"read_status": {}},
}

MONITORED_FIELDS = {
    "motor": {"position", "moving"},
    "supply": {"output_v", "setpoint_v", "enabled"},
    "digitizer": {"acquisitions", "shot_number"},
    "sensor": {"value"},
}

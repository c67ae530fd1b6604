"""Power supply: setpoint with linear ramp; output forced to zero when disabled."""

from __future__ import annotations

from ..values import StatusValue, sv_bool, sv_real
from .core import BadArgs, DeviceCore, OverLimit, _req

RAMP_EPS_V = 1e-9


class Supply(DeviceCore):
    kind = "supply"
    OPS = {
        "set_voltage": ("op_set_voltage", True),
        "enable": ("op_enable", True),
        "disable": ("op_disable", True),
    }

    def _init_state(self, init_attrs, persisted):
        self.limit_v = _req(init_attrs, "limit_v", "real")
        self.ramp_rate = _req(init_attrs, "ramp_rate", "real")
        self.deadband = _req(init_attrs, "deadband", "real")
        if self.limit_v <= 0 or self.ramp_rate <= 0:
            raise OverLimit(f"limit_v {self.limit_v}, ramp_rate {self.ramp_rate}")
        sp = persisted.get("setpoint_v", init_attrs.get("setpoint_v"))
        en = persisted.get("enabled", init_attrs.get("enabled"))
        self.setpoint_v = sp.value if sp is not None else 0.0
        self.enabled = bool(en.value) if en is not None else False
        if abs(self.setpoint_v) > self.limit_v:
            raise OverLimit(f"persisted setpoint {self.setpoint_v}")
        out = persisted.get("output_v")
        self.output_v = out.value if (out is not None and self.enabled) else 0.0

    def _register_channels(self):
        self._channel("output_v", "real", self.deadband)
        self._channel("setpoint_v", "real")
        self._channel("enabled", "bool")

    def state_payload(self):
        return {"setpoint_v": sv_real(self.setpoint_v), "output_v": sv_real(self.output_v),
                "enabled": sv_bool(self.enabled), "ramp_rate": sv_real(self.ramp_rate),
                "limit_v": sv_real(self.limit_v)}

    # -- operations --------------------------------------------------------

    def set_voltage(self, volts: float, key=None) -> dict[str, StatusValue]:
        self._check_key(key)
        return self._do_set_voltage(volts)

    def _do_set_voltage(self, volts: float):
        if abs(volts) > self.limit_v:
            raise OverLimit(f"{volts} V exceeds limit {self.limit_v} V")
        with self._lock:
            self.setpoint_v = float(volts)
            self.mark_dirty()
        self._ingest("setpoint_v", self.setpoint_v)
        return self.state_payload()

    def enable(self, key=None) -> dict[str, StatusValue]:
        self._check_key(key)
        return self._do_enable()

    def _do_enable(self):
        with self._lock:
            self.enabled = True
            self.mark_dirty()
        self._ingest("enabled", True)
        return self.state_payload()

    def disable(self, key=None) -> dict[str, StatusValue]:
        """Output drops to zero immediately, not at the ramp rate."""
        self._check_key(key)
        return self._do_disable()

    def _do_disable(self):
        with self._lock:
            self.enabled = False
            self.output_v = 0.0
            self.mark_dirty()
        self._ingest("enabled", False)
        self._ingest("output_v", 0.0)
        self.flush_state()
        return self.state_payload()

    def sim_tick(self, dt_s: float) -> None:
        changed = False
        with self._lock:
            if self.enabled and abs(self.output_v - self.setpoint_v) > RAMP_EPS_V:
                step = self.ramp_rate * dt_s
                delta = self.setpoint_v - self.output_v
                if abs(delta) <= step:
                    self.output_v = self.setpoint_v
                else:
                    self.output_v += step if delta > 0 else -step
                self.output_v = min(max(self.output_v, -self.limit_v), self.limit_v)
                self.mark_dirty()
                changed = True
        if changed:
            self._ingest("output_v", self.output_v)

    # bus op adapters (key already validated by handle)
    def op_set_voltage(self, args):
        v = args.get("volts")
        if v is None or v.tag != "real":
            raise BadArgs("set_voltage needs a real 'volts'")
        return self._do_set_voltage(v.value)

    def op_enable(self, args):
        return self._do_enable()

    def op_disable(self, args):
        return self._do_disable()

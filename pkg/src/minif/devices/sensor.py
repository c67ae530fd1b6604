"""Passive sensor: a slow seeded drift; nothing to command, plenty to watch."""

from __future__ import annotations

import math
import random

from ..values import sv_real
from .core import DeviceCore, _req


class Sensor(DeviceCore):
    kind = "sensor"
    OPS = {}

    def _init_state(self, init_attrs, persisted):
        self.base = _req(init_attrs, "base", "real")
        self.amp = _req(init_attrs, "amp", "real")
        self.period_s = _req(init_attrs, "period_s", "real")
        self.noise = _req(init_attrs, "noise", "real")
        self.deadband = _req(init_attrs, "deadband", "real")
        seed = _req(init_attrs, "seed", "int")
        self._rng = random.Random(seed)
        self._t = 0.0
        val = persisted.get("value")
        self.value = val.value if val is not None else self.base

    def _register_channels(self):
        self._channel("value", "real", self.deadband)

    def state_payload(self):
        return {"value": sv_real(self.value)}

    def sim_tick(self, dt_s: float) -> None:
        with self._lock:
            self._t += dt_s
            self.value = (self.base
                          + self.amp * math.sin(2 * math.pi * self._t / self.period_s)
                          + self._rng.gauss(0.0, self.noise))
            self.mark_dirty()
        self._ingest("value", self.value)

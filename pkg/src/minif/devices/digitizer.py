"""Transient digitizer: synthetic waveform capture, deterministic per
(device seed, shot number)."""

from __future__ import annotations

import math
import random

from ..values import StatusValue, sv_int, sv_real, sv_text, sv_vector
from .core import BadArgs, DeviceCore, WaveRecord, _req

MAX_SAMPLES = 65_536


class Digitizer(DeviceCore):
    kind = "digitizer"
    OPS = {
        "acquire": ("op_acquire", True),
        "set_shot": ("op_set_shot", True),
    }

    def _init_state(self, init_attrs, persisted):
        self.seed = _req(init_attrs, "seed", "int")
        shot = persisted.get("shot_number")
        self.shot_number = shot.value if shot is not None else 0
        acq = persisted.get("acquisitions")
        self.acquisitions = acq.value if acq is not None else 0
        self.wave_sink = None          # installed by the hosting process

    def _register_channels(self):
        self._channel("acquisitions", "int")
        self._channel("shot_number", "int")

    def state_payload(self):
        return {"acquisitions": sv_int(self.acquisitions),
                "shot_number": sv_int(self.shot_number),
                "seed": sv_int(self.seed)}

    # -- operations ----------------------------------------------------------

    def acquire(self, nsamples: int, dt: float, key=None) -> WaveRecord:
        self._check_key(key)
        return self._do_acquire(nsamples, dt)

    def _do_acquire(self, nsamples: int, dt: float) -> WaveRecord:
        if not isinstance(nsamples, int) or not 1 <= nsamples <= MAX_SAMPLES:
            raise BadArgs(f"nsamples {nsamples!r}")
        if not dt > 0:
            raise BadArgs(f"dt {dt!r}")
        with self._lock:
            rng = random.Random((self.seed << 20) ^ self.shot_number)
            freq = 2.0 + rng.random() * 8.0            # Hz
            decay = 0.5 + rng.random() * 2.0           # 1/s
            amp = 1.0 + rng.random() * 4.0
            samples = tuple(
                amp * math.exp(-decay * i * dt) * math.sin(2 * math.pi * freq * i * dt)
                + rng.gauss(0.0, 0.01)
                for i in range(nsamples))
            wave = WaveRecord(device=self.name, t0=self.clock.now_ms(),
                              dt=dt, samples=samples)
            self.acquisitions += 1
            self.mark_dirty()
            sink = self.wave_sink
        self._ingest("acquisitions", self.acquisitions)
        if sink is not None:
            sink(wave)
        return wave

    def set_shot(self, shot_number: int, key=None) -> None:
        self._check_key(key)
        self._do_set_shot(shot_number)

    def _do_set_shot(self, shot_number: int):
        with self._lock:
            self.shot_number = int(shot_number)
            self.mark_dirty()
        self._ingest("shot_number", self.shot_number)
        return {"shot_number": sv_int(self.shot_number)}

    # bus op adapters (key already validated by handle)
    def op_acquire(self, args):
        n = args.get("nsamples")
        dt = args.get("dt")
        if n is None or n.tag != "int" or dt is None or dt.tag != "real":
            raise BadArgs("acquire needs int 'nsamples' and real 'dt'")
        wave = self._do_acquire(n.value, dt.value)
        return {"device": sv_text(wave.device), "t0": sv_int(wave.t0),
                "dt": sv_real(wave.dt), "samples": sv_vector(wave.samples)}

    def op_set_shot(self, args):
        n = args.get("shot_number")
        if n is None or n.tag != "int":
            raise BadArgs("set_shot needs an int 'shot_number'")
        return self._do_set_shot(n.value)

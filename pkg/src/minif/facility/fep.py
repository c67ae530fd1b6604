"""Front-end processor executable: factories, devices, status, shot strategy.

Start-up: load served configuration from the persistence broker, build one
live object per record through the factory registry, register everything on
the bus, then tick the simulation on a wall-clock loop while heartbeating.
"""

from __future__ import annotations

import logging
import threading
import time

from ..config import FactoryRegistry, load_process_config
from ..devices import build_device
from ..persist import BrokerClient
from ..reserve import ReserveClient
from ..shotseq import ParticipantServant, Strategy
from ..shotseq.coordinator import SERVICE_NAME as SHOT_SVC
from ..statmon import StatusMonitor
from ..values import canonical_json, sv_text
from .procbase import FacilityConfig, ProcServant, ProcessApp

log = logging.getLogger(__name__)

FLUSH_INTERVAL_S = 1.0
STRATEGY_SAMPLE = 3       # devices per kind a shot strategy actually drives


class FepApp(ProcessApp):
    def __init__(self, process_id: str, config: FacilityConfig):
        super().__init__(process_id, config)
        self.store = BrokerClient(self.node, config.persist_partition)
        self.reserve = ReserveClient(self.node)
        self.monitor = StatusMonitor(publish=self.node.publish)
        self.devices: dict[str, object] = {}
        self.records: dict[str, object] = {}
        self.manifest = None
        self._dirty_lock = threading.Lock()
        self.shot_strategy = FepShotStrategy(self)

    # -- start-up -----------------------------------------------------------

    def start(self):
        self.retry(lambda: self.store.ping(), "persistence broker")
        self.manifest, records = load_process_config(self.store, self.process_id)
        registry = FactoryRegistry()
        for kind in ("motor", "supply", "digitizer", "sensor"):
            registry.register_factory(kind, self._builder(kind))
        built: list[tuple[str, object]] = []
        registry.instantiate_process(self.manifest, records,
                                     on_built=lambda name, dev: built.append((name, dev)))
        for name, device in built:
            self.devices[name] = device
        for rec in records:
            self.records[rec.name] = rec
        # one hub round trip registers the whole population
        entries = list(built)
        entries.append((f"proc.{self.process_id}",
                        ProcServant(self, self.monitor, self.manifest)))
        self.node.register_many(entries)
        self.start_heartbeats()
        self._spawn(self._sim_loop, "sim")
        self._spawn(self._register_participant, "participant")
        self.logc.log("info", "fep", f"up with {len(self.devices)} devices",
                      fep_type=self.manifest.fep_type)
        log.info("%s: %d devices registered", self.process_id, len(self.devices))
        return self

    def _builder(self, kind):
        def build(record):
            device = build_device(record, self.monitor,
                                  validator=self._validate_key,
                                  persister=self._persist_state,
                                  history=self._record_history)
            if kind == "digitizer":
                device.wave_sink = self.shot_strategy.offer_wave
            return device

        return build

    def _validate_key(self, taxon: str, key):
        if key is None:
            return None
        try:
            return self.reserve.validate(taxon, key)
        except Exception:  # noqa: BLE001 - reservation service unreachable
            return None

    def _persist_state(self, name: str, state_payload):
        rec = self.records.get(name)
        if rec is None:
            return
        rec.persisted_state = dict(state_payload)
        with self._dirty_lock:
            self._pending = getattr(self, "_pending", {})
            self._pending[name] = rec

    def _record_history(self, component: str, kind: str, data: dict):
        try:
            self.logc.record_history(component, kind, data)
        except Exception:  # noqa: BLE001 - history is best-effort
            pass

    # -- run loops -------------------------------------------------------------

    def _sim_loop(self):
        dt = 1.0 / self.config.sim_tick_hz
        last_flush = time.monotonic()
        while not self._stop.wait(dt):
            for device in self.devices.values():
                try:
                    device.sim_tick(dt)
                except Exception:  # noqa: BLE001
                    log.exception("sim tick failed for %s", device.name)
            if time.monotonic() - last_flush >= FLUSH_INTERVAL_S:
                last_flush = time.monotonic()
                self.flush_dirty()

    def flush_dirty(self) -> int:
        with self._dirty_lock:
            pending = getattr(self, "_pending", {})
            self._pending = {}
        if not pending:
            return 0
        batch = [("devrec", name, rec.to_payload()) for name, rec in pending.items()]
        try:
            self.store.put_many(batch)
            return len(batch)
        except Exception as e:  # noqa: BLE001 - retry next flush
            log.warning("state flush deferred: %s", e)
            with self._dirty_lock:
                merged = dict(pending)
                merged.update(self._pending)
                self._pending = merged
            return 0

    def _register_participant(self):
        servant_name = f"svc.shotpart.{self.process_id}"
        try:
            self.node.register_object(servant_name,
                                      ParticipantServant(self.shot_strategy))
        except Exception:  # noqa: BLE001
            log.exception("could not register participant servant")
            return
        while not self._stop.is_set():
            try:
                self.node.invoke(SHOT_SVC, "register_participant",
                                 {"subsystem": self.process_id,
                                  "endpoint": servant_name}, timeout_ms=1000)
                return
            except Exception:  # noqa: BLE001 - supervisor not up yet
                if self._stop.wait(0.5):
                    return

    def devices_of_kind(self, kind: str, limit: int | None = None):
        out = [d for d in self.devices.values() if d.kind == kind]
        out.sort(key=lambda d: d.name)
        return out if limit is None else out[:limit]


class FepShotStrategy(Strategy):
    """What this FEP does at each shot phase, scaled to a handful of devices.

    setup reserves the FEP's control points under a shot-scoped key; arm
    spins supplies up; postshot pulls digitizer waveforms into the archive;
    analyze (or safe_abort) releases everything.
    """

    def __init__(self, app: FepApp):
        self.app = app
        self.key: str | None = None
        self.shot_id: int | None = None

    def offer_wave(self, wave):
        if self.shot_id is None:
            return
        try:
            self.app.node.invoke(SHOT_SVC, "attach_wave",
                                 {"shot_id": self.shot_id,
                                  "wave": canonical_json(wave.to_json())},
                                 timeout_ms=2000)
        except Exception:  # noqa: BLE001 - archive is best-effort mid-shot
            log.warning("wave attach failed for %s", wave.device)

    def propose(self, shot_id, phase, ordinal, params):
        app = self.app
        if phase == "setup":
            try:
                self.key = app.reserve.reserve_group(
                    sorted(app.devices), f"shot-{shot_id}-{app.process_id}")
                self.shot_id = shot_id
            except Exception as e:  # noqa: BLE001
                return False, f"reservation conflict: {getattr(e, 'detail', e)}"
        if phase == "prepare":
            moving = [d.name for d in app.devices_of_kind("motor")
                      if getattr(d, "moving", False)]
            if moving:
                return False, f"motors still moving: {moving[:3]}"
        return True, ""

    def commit(self, shot_id, phase, ordinal, params):
        app = self.app
        if self.key is None:
            return
        if phase == "setup":
            for dg in app.devices_of_kind("digitizer", STRATEGY_SAMPLE):
                dg.set_shot(shot_id, self.key)
        elif phase == "arm":
            volts = float(params.get("arm_voltage", 20.0))
            for ps in app.devices_of_kind("supply", STRATEGY_SAMPLE):
                ps.set_voltage(min(volts, ps.limit_v), self.key)
                ps.enable(self.key)
        elif phase == "postshot":
            for ps in app.devices_of_kind("supply", STRATEGY_SAMPLE):
                ps.disable(self.key)
            for dg in app.devices_of_kind("digitizer", STRATEGY_SAMPLE):
                dg.acquire(int(params.get("nsamples", 256)), 1e-6, self.key)
        elif phase == "analyze":
            self._release()

    def safe_abort(self, shot_id):
        app = self.app
        if self.key is not None:
            for m in app.devices_of_kind("motor"):
                if getattr(m, "moving", False):
                    m.halt(self.key)
            for ps in app.devices_of_kind("supply", STRATEGY_SAMPLE):
                ps.disable(self.key)
        self._release()

    def _release(self):
        if self.key is not None:
            try:
                self.app.reserve.release(self.key)
            except Exception:  # noqa: BLE001 - already released/broken
                pass
        self.key = None
        self.shot_id = None


def main(args, config: FacilityConfig):
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    app = FepApp(args.process_id, config)
    try:
        app.start()
    except Exception:
        log.exception("FEP start-up failed")
        raise SystemExit(1)
    app.run_forever()

"""Process registry fed by heartbeats; liveness thresholds drive failover.

A process is suspect after 3 missed heartbeat intervals and dead after 5,
measured from its last heartbeat (or registration, for a process that never
came up). Dead processes with a respawn policy are relaunched after their
backoff with attempts decremented; exhaustion raises a fatal alert. Every
transition publishes a "svc.state" event.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..clock import Clock, WALL
from ..errors import MinifError
from ..values import canonical_json, sv_int, sv_text
from ..wirebus.node import OpServant

log = logging.getLogger(__name__)

SERVICE_NAME = "svc.sysmgr"
TOPIC_STATE = "svc.state"
HEARTBEAT_INTERVAL_MS = 1000
SUSPECT_MISSES = 3
DEAD_MISSES = 5


class Duplicate(MinifError):
    pass


class Unknown(MinifError):
    pass


class PolicyExhausted(MinifError):
    pass


@dataclass
class ProcessRecord:
    process_id: str
    spawn_command: str = ""
    restart_policy: str = "never"          # never | respawn
    max_attempts: int = 0
    backoff_ms: int = 500
    state: str = "starting"                # starting | up | suspect | dead
    incarnation: int = 1
    last_heartbeat: Optional[int] = None
    last_seq: int = -1
    registered_at: int = 0
    attempts_used: int = 0
    pid: Optional[int] = None
    stats: dict = field(default_factory=dict)
    dead_since: Optional[int] = None
    respawn_due: Optional[int] = None

    def to_json(self) -> dict:
        return {"process_id": self.process_id, "state": self.state,
                "incarnation": self.incarnation, "last_heartbeat": self.last_heartbeat,
                "restart_policy": self.restart_policy,
                "attempts_used": self.attempts_used, "max_attempts": self.max_attempts,
                "pid": self.pid, "stats": self.stats}


class SystemManager:
    def __init__(self, clock: Clock = WALL,
                 publish: Callable[[str, dict], None] | None = None,
                 raise_alert: Callable[[str, str, str], None] | None = None,
                 ingest_stats: Callable[[str, dict], None] | None = None,
                 interval_ms: int = HEARTBEAT_INTERVAL_MS,
                 spawner: Callable[[str], int] | None = None):
        self.clock = clock
        self._publish = publish
        self._raise_alert = raise_alert
        self._ingest_stats = ingest_stats
        self.interval_ms = interval_ms
        self._spawner = spawner or _shell_spawner
        self._procs: dict[str, ProcessRecord] = {}
        self._lock = threading.Lock()
        self._watchers: list[Callable[[dict], None]] = []
        self._timer: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # -- registry --------------------------------------------------------

    def register_process(self, record: ProcessRecord) -> None:
        with self._lock:
            if record.process_id in self._procs:
                raise Duplicate(record.process_id)
            record.state = "starting"
            record.registered_at = self.clock.now_ms()
            self._procs[record.process_id] = record

    def heartbeat(self, process_id: str, seq: int, stats: dict | None = None) -> None:
        with self._lock:
            rec = self._procs.get(process_id)
            if rec is None:
                raise Unknown(process_id)
            if seq <= rec.last_seq:
                return                      # replayed or reordered; ignore
            rec.last_seq = seq
            rec.last_heartbeat = self.clock.now_ms()
            if stats:
                rec.stats = dict(stats)
                if "pid" in stats:
                    rec.pid = int(stats["pid"])
            transition = None
            if rec.state in ("starting", "suspect", "dead"):
                transition = (rec.state, "up")
                rec.state = "up"
                rec.dead_since = None
                rec.respawn_due = None
        if transition:
            self._emit(process_id, *transition)
        if stats and self._ingest_stats is not None:
            self._ingest_stats(process_id, stats)

    # -- liveness ------------------------------------------------------------

    def evaluate(self, now_ms: int | None = None) -> list[tuple[str, str, str]]:
        """Apply thresholds; returns transitions [(pid, old, new)]."""
        now = now_ms if now_ms is not None else self.clock.now_ms()
        transitions = []
        respawn = []
        with self._lock:
            for rec in self._procs.values():
                baseline = rec.last_heartbeat if rec.last_heartbeat is not None \
                    else rec.registered_at
                silent_for = now - baseline
                if rec.state in ("up", "starting") and silent_for >= DEAD_MISSES * self.interval_ms:
                    transitions.append((rec.process_id, rec.state, "dead"))
                    rec.state = "dead"
                    rec.dead_since = now
                elif rec.state in ("up", "starting") and silent_for >= SUSPECT_MISSES * self.interval_ms:
                    transitions.append((rec.process_id, rec.state, "suspect"))
                    rec.state = "suspect"
                elif rec.state == "suspect" and silent_for >= DEAD_MISSES * self.interval_ms:
                    transitions.append((rec.process_id, "suspect", "dead"))
                    rec.state = "dead"
                    rec.dead_since = now
                if rec.state == "dead" and rec.restart_policy == "respawn" \
                        and rec.respawn_due is None:
                    if rec.attempts_used < rec.max_attempts:
                        rec.respawn_due = (rec.dead_since or now) + rec.backoff_ms
                    else:
                        rec.respawn_due = -1   # exhausted; alert once
                        respawn.append((rec.process_id, "exhausted"))
                if rec.state == "dead" and rec.respawn_due is not None \
                        and rec.respawn_due > 0 and now >= rec.respawn_due:
                    respawn.append((rec.process_id, "go"))
        for pid, old, new in transitions:
            self._emit(pid, old, new)
        for pid, action in respawn:
            if action == "go":
                try:
                    self.failover(pid)
                except MinifError as e:
                    log.warning("failover of %s failed: %s", pid, e)
            else:
                log.error("restart policy exhausted for %s", pid)
                if self._raise_alert is not None:
                    self._raise_alert("fatal", f"sys.{pid}",
                                      f"process {pid} dead, restart policy exhausted")
        return transitions

    def failover(self, process_id: str) -> int:
        """Respawn a dead process; returns the new incarnation."""
        with self._lock:
            rec = self._procs.get(process_id)
            if rec is None:
                raise Unknown(process_id)
            if rec.state != "dead":
                raise MinifError(f"{process_id} is {rec.state}, not dead")
            if rec.restart_policy != "respawn":
                raise MinifError(f"{process_id} has policy never")
            if rec.attempts_used >= rec.max_attempts:
                raise PolicyExhausted(process_id)
            rec.attempts_used += 1
            rec.incarnation += 1
            rec.state = "starting"
            rec.registered_at = self.clock.now_ms()
            rec.last_heartbeat = None
            rec.last_seq = -1
            rec.dead_since = None
            rec.respawn_due = None
            command = rec.spawn_command
            incarnation = rec.incarnation
        log.info("respawning %s (attempt %d): %s", process_id,
                 incarnation - 1, command)
        pid = self._spawner(command)
        with self._lock:
            self._procs[process_id].pid = pid
        self._emit(process_id, "dead", "starting")
        return incarnation

    def spawn(self, process_id: str) -> int:
        """First launch of a registered process."""
        with self._lock:
            rec = self._procs.get(process_id)
            if rec is None:
                raise Unknown(process_id)
            command = rec.spawn_command
        if not command:
            raise MinifError(f"{process_id} has no spawn command")
        pid = self._spawner(command)
        with self._lock:
            self._procs[process_id].pid = pid
        return pid

    def kill(self, process_id: str, sig: int = 9) -> None:
        """Scenario plumbing: SIGKILL a managed process."""
        import os
        import signal as _signal
        with self._lock:
            rec = self._procs.get(process_id)
            if rec is None or rec.pid is None:
                raise Unknown(process_id)
            pid = rec.pid
        os.kill(pid, _signal.Signals(sig))

    # -- observation ----------------------------------------------------------

    def report(self) -> list[dict]:
        with self._lock:
            return [rec.to_json() for rec in
                    sorted(self._procs.values(), key=lambda r: r.process_id)]

    def state_of(self, process_id: str) -> str:
        with self._lock:
            rec = self._procs.get(process_id)
            if rec is None:
                raise Unknown(process_id)
            return rec.state

    def watch(self, callback: Callable[[dict], None]) -> None:
        with self._lock:
            self._watchers.append(callback)

    def _emit(self, process_id: str, old: str, new: str):
        with self._lock:
            incarnation = self._procs[process_id].incarnation
            watchers = list(self._watchers)
        event = {"process_id": process_id, "old": old, "new": new,
                 "incarnation": incarnation, "ts": self.clock.now_ms()}
        log.info("svc.state %s: %s -> %s", process_id, old, new)
        if self._publish is not None:
            self._publish(TOPIC_STATE, event)
        for cb in watchers:
            try:
                cb(event)
            except Exception:
                log.exception("state watcher failed")

    # -- timer ------------------------------------------------------------------

    def start_timer(self):
        def loop():
            while not self._stop.wait(self.interval_ms / 1000.0):
                try:
                    self.evaluate()
                except Exception:
                    log.exception("evaluate failed")

        self._timer = threading.Thread(target=loop, name="sysmgr-eval", daemon=True)
        self._timer.start()
        return self

    def stop(self):
        self._stop.set()


def _shell_spawner(command: str) -> int:
    proc = subprocess.Popen(shlex.split(command), start_new_session=True)
    return proc.pid


class SysmgrServant(OpServant):
    def __init__(self, manager: SystemManager):
        self.manager = manager

    def op_register_process(self, args, ctx):
        obj = json.loads(args["record"].value)
        self.manager.register_process(ProcessRecord(
            process_id=obj["process_id"],
            spawn_command=obj.get("spawn_command", ""),
            restart_policy=obj.get("restart_policy", "never"),
            max_attempts=obj.get("max_attempts", 0),
            backoff_ms=obj.get("backoff_ms", 500)))
        return {}

    def op_heartbeat(self, args, ctx):
        stats = json.loads(args["stats"].value) if "stats" in args else None
        self.manager.heartbeat(args["process_id"].value, args["seq"].value, stats)
        return {}

    def op_spawn(self, args, ctx):
        return {"pid": sv_int(self.manager.spawn(args["process_id"].value))}

    def op_kill(self, args, ctx):
        self.manager.kill(args["process_id"].value)
        return {}

    def op_report(self, args, ctx):
        return {"processes": sv_text(canonical_json(self.manager.report()))}

    def op_state(self, args, ctx):
        return {"state": sv_text(self.manager.state_of(args["process_id"].value))}

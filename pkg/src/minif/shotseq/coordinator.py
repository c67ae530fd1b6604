"""Shot coordinator: drives the nine phases through two-phase steps.

Each step proposes the next phase to every participant concurrently; only
a unanimous ready within the per-phase timeout earns the commit fan-out.
Any fail, timeout or unreachable participant routes to the abort path:
before fire the machine returns straight to idle via safe_abort, at or
after fire it still runs postshot and analyze (a fired shot cannot be
un-fired, but its data can be saved). Every transition is persisted, so a
coordinator restart resolves an in-flight shot to aborted instead of
wedging.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..clock import Clock, WALL
from ..errors import MinifError, RemoteError
from ..values import canonical_json, sv_int, sv_text
from ..wirebus.errors import BusTimeout, Disconnected, NameNotFound
from ..wirebus.node import OpServant
from .phases import FIRE_ORDINAL, PHASES

log = logging.getLogger(__name__)

SERVICE_NAME = "svc.shot"
TOPIC_PHASE = "shot.phase"
TOPIC_OUTCOME = "shot.outcome"
SAFE_ABORT_TIMEOUT_MS = 2000


class ShotInProgress(MinifError):
    pass


class UnknownParticipant(MinifError):
    pass


class NoActiveShot(MinifError):
    pass


class UnknownShot(MinifError):
    pass


class Duplicate(MinifError):
    pass


@dataclass
class ShotPlan:
    participants: list[str]
    parameters: dict = field(default_factory=dict)
    timeout_per_phase_ms: int = 2000
    shot_id: int = 0            # assigned by the coordinator at start

    def to_json(self) -> dict:
        return {"shot_id": self.shot_id, "participants": self.participants,
                "parameters": self.parameters,
                "timeout_per_phase_ms": self.timeout_per_phase_ms}

    @classmethod
    def from_json(cls, obj: dict) -> "ShotPlan":
        return cls(participants=list(obj["participants"]),
                   parameters=obj.get("parameters", {}),
                   timeout_per_phase_ms=obj.get("timeout_per_phase_ms", 2000),
                   shot_id=obj.get("shot_id", 0))


@dataclass
class PhaseAttempt:
    phase: str
    ordinal: int
    started_ms: int
    votes: dict = field(default_factory=dict)   # participant -> {vote, reason, elapsed_ms}
    committed: bool = False
    committed_ms: Optional[int] = None

    def to_json(self) -> dict:
        return {"phase": self.phase, "ordinal": self.ordinal,
                "started_ms": self.started_ms, "votes": self.votes,
                "committed": self.committed, "committed_ms": self.committed_ms}


@dataclass
class ShotRecord:
    shot_id: int
    plan: ShotPlan
    transcript: list[PhaseAttempt] = field(default_factory=list)
    outcome: Optional[dict] = None
    waves: list[dict] = field(default_factory=list)

    def committed_phases(self) -> list[str]:
        return [a.phase for a in self.transcript if a.committed]

    def to_json(self) -> dict:
        return {"shot_id": self.shot_id, "plan": self.plan.to_json(),
                "transcript": [a.to_json() for a in self.transcript],
                "outcome": self.outcome, "waves": self.waves}

    @classmethod
    def from_json(cls, obj: dict) -> "ShotRecord":
        rec = cls(shot_id=obj["shot_id"], plan=ShotPlan.from_json(obj["plan"]))
        for a in obj.get("transcript", []):
            rec.transcript.append(PhaseAttempt(
                phase=a["phase"], ordinal=a["ordinal"], started_ms=a["started_ms"],
                votes=a.get("votes", {}), committed=a["committed"],
                committed_ms=a.get("committed_ms")))
        rec.outcome = obj.get("outcome")
        rec.waves = obj.get("waves", [])
        return rec


class ShotCoordinator:
    """Singleton per facility; one shot at a time."""

    def __init__(self, invoke: Callable, store=None,
                 publish: Callable[[str, dict], None] | None = None,
                 clock: Clock = WALL):
        self.invoke = invoke            # invoke(endpoint, op, args, timeout_ms)
        self.store = store
        self._publish_cb = publish
        self.clock = clock
        self.participants: dict[str, str] = {}
        self._active: Optional[ShotRecord] = None
        self._finished: dict[int, ShotRecord] = {}
        self._abort_requested: Optional[str] = None
        self._next_id = 1
        self._lock = threading.RLock()
        self._step_lock = threading.Lock()   # serializes phase fan-outs
        if store is not None:
            self._recover()

    # -- plumbing -----------------------------------------------------------

    def _recover(self):
        for rec in self.store.load_class("shot"):
            shot = ShotRecord.from_json(json.loads(rec.payload["blob"].value))
            self._next_id = max(self._next_id, shot.shot_id + 1)
            if shot.outcome is None:
                committed = shot.committed_phases()
                shot.outcome = {"outcome": "aborted",
                                "phase": committed[-1] if committed else "setup",
                                "reason": "coordinator restart", "archived": False}
                self._persist(shot)
                log.warning("shot %d resolved to aborted after restart", shot.shot_id)

    def _persist(self, shot: ShotRecord):
        if self.store is not None:
            self.store.put("shot", f"{shot.shot_id:08d}",
                           {"blob": sv_text(canonical_json(shot.to_json()))})

    def _publish(self, topic: str, payload: dict):
        if self._publish_cb is not None:
            self._publish_cb(topic, payload)

    # -- registration ---------------------------------------------------------

    def register_participant(self, subsystem: str, endpoint: str) -> None:
        with self._lock:
            if subsystem in self.participants:
                raise Duplicate(subsystem)
            self.participants[subsystem] = endpoint

    # -- life cycle -------------------------------------------------------------

    @property
    def idle(self) -> bool:
        with self._lock:
            return self._active is None

    def current_shot(self) -> Optional[ShotRecord]:
        with self._lock:
            return self._active

    def start_shot(self, plan: ShotPlan) -> tuple[int, dict]:
        """Create the shot and run the first two-phase step (setup).
        Returns (shot_id, step outcome)."""
        with self._lock:
            if self._active is not None:
                raise ShotInProgress(f"shot {self._active.shot_id} active")
            if not plan.participants:
                raise UnknownParticipant("plan has no participants")
            unknown = [p for p in plan.participants if p not in self.participants]
            if unknown:
                raise UnknownParticipant(canonical_json(unknown))
            plan.shot_id = self._next_id
            self._next_id += 1
            shot = ShotRecord(shot_id=plan.shot_id, plan=plan)
            self._active = shot
            self._abort_requested = None
            self._persist(shot)
        return plan.shot_id, self.advance()

    def advance(self) -> dict:
        """Run the next two-phase step (or the pending abort)."""
        with self._step_lock:
            with self._lock:
                shot = self._active
                if shot is None:
                    raise NoActiveShot()
                reason = self._abort_requested
            if reason is not None:
                return self._abort_path(shot, reason, phase=None)
            next_ordinal = len(shot.committed_phases()) + 1
            phase = PHASES[next_ordinal - 1]
            attempt = self._two_phase(shot, phase, next_ordinal)
            if attempt.committed:
                with self._lock:
                    pending = self._abort_requested
                if pending is not None and next_ordinal < len(PHASES):
                    return self._abort_path(shot, pending, phase=phase)
                if next_ordinal == len(PHASES):
                    return self._finish(shot, {"outcome": "completed"})
                return {"status": "committed", "phase": phase, "ordinal": next_ordinal}
            failures = {p: v for p, v in attempt.votes.items() if v["vote"] != "ready"}
            first = sorted(failures)[0]
            detail = failures[first]["reason"]
            return self._abort_path(
                shot, f"{detail}({phase}, {first})", phase=phase)

    def _two_phase(self, shot: ShotRecord, phase: str, ordinal: int) -> PhaseAttempt:
        attempt = PhaseAttempt(phase=phase, ordinal=ordinal,
                               started_ms=self.clock.now_ms())
        shot.transcript.append(attempt)
        args = {"shot_id": shot.shot_id, "phase": phase, "ordinal": ordinal,
                "params": canonical_json(shot.plan.parameters)}
        timeout = shot.plan.timeout_per_phase_ms

        def propose(participant: str):
            endpoint = self.participants[participant]
            t0 = self.clock.now_ms()
            try:
                reply = self.invoke(endpoint, "propose", args, timeout_ms=timeout)
                vote = reply["vote"].value
                reason = reply.get("reason", sv_text("")).value
            except BusTimeout:
                vote, reason = "fail", "timeout"
            except (Disconnected, NameNotFound) as e:
                vote, reason = "fail", f"unreachable:{type(e).__name__}"
            except RemoteError as e:
                vote, reason = "fail", f"error:{e.code}"
            attempt.votes[participant] = {"vote": vote, "reason": reason,
                                          "elapsed_ms": self.clock.now_ms() - t0}

        threads = [threading.Thread(target=propose, args=(p,), daemon=True)
                   for p in shot.plan.participants]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout / 1000.0 + 5.0)
        for p in shot.plan.participants:
            attempt.votes.setdefault(p, {"vote": "fail", "reason": "no vote",
                                         "elapsed_ms": timeout})

        if all(v["vote"] == "ready" for v in attempt.votes.values()):
            # unanimous: commit fan-out (only now may anyone enter the phase)
            for participant in shot.plan.participants:
                endpoint = self.participants[participant]
                try:
                    self.invoke(endpoint, "commit", args, timeout_ms=timeout)
                except (BusTimeout, Disconnected, NameNotFound, RemoteError) as e:
                    log.warning("commit(%s) undeliverable to %s: %s",
                                phase, participant, e)
                    with self._lock:
                        if self._abort_requested is None:
                            self._abort_requested = f"commit lost({phase}, {participant})"
            attempt.committed = True
            attempt.committed_ms = self.clock.now_ms()
            self._persist(shot)
            self._publish(TOPIC_PHASE, {"shot_id": shot.shot_id, "phase": phase,
                                        "ordinal": ordinal})
        else:
            self._persist(shot)
        return attempt

    def abort(self, reason: str) -> dict:
        """Operator/automation abort. Pre-fire aborts run immediately when no
        step is in flight; otherwise the running step picks the flag up."""
        with self._lock:
            shot = self._active
            if shot is None:
                raise NoActiveShot()
            self._abort_requested = reason
        if self._step_lock.acquire(blocking=False):
            try:
                with self._lock:
                    if self._active is None:
                        return {"status": "idle"}
                return self._abort_path(self._active, reason, phase=None)
            finally:
                self._step_lock.release()
        return {"status": "abort pending", "reason": reason}

    def _abort_path(self, shot: ShotRecord, reason: str, phase: str | None) -> dict:
        committed = shot.committed_phases()
        fired = len(committed) >= FIRE_ORDINAL
        at_phase = phase or (committed[-1] if committed else PHASES[0])
        if fired:
            # post-fire: acquisition still runs; best effort through analyze
            while len(shot.committed_phases()) < len(PHASES):
                next_ordinal = len(shot.committed_phases()) + 1
                attempt = self._two_phase(shot, PHASES[next_ordinal - 1], next_ordinal)
                if not attempt.committed:
                    break
            return self._finish(shot, {"outcome": "aborted", "phase": at_phase,
                                       "reason": reason, "archived": True})
        timeout = min(shot.plan.timeout_per_phase_ms, SAFE_ABORT_TIMEOUT_MS)
        for participant in shot.plan.participants:
            endpoint = self.participants.get(participant)
            try:
                self.invoke(endpoint, "safe_abort", {"shot_id": shot.shot_id},
                            timeout_ms=timeout)
            except (BusTimeout, Disconnected, NameNotFound, RemoteError) as e:
                log.warning("safe_abort undeliverable to %s: %s", participant, e)
        return self._finish(shot, {"outcome": "aborted", "phase": at_phase,
                                   "reason": reason, "archived": False})

    def _finish(self, shot: ShotRecord, outcome: dict) -> dict:
        shot.outcome = outcome
        self._persist(shot)
        with self._lock:
            self._finished[shot.shot_id] = shot
            self._active = None
            self._abort_requested = None
        self._publish(TOPIC_OUTCOME, {"shot_id": shot.shot_id,
                                      "outcome": canonical_json(outcome)})
        return outcome

    def run_to_completion(self, plan: ShotPlan) -> ShotRecord:
        """Start and advance until the coordinator is idle again."""
        shot_id, step = self.start_shot(plan)
        while not self.idle:
            self.advance()
        return self.get_shot(shot_id)

    def run_shot_async(self, plan: ShotPlan, dwell_ms: int = 0) -> int:
        """Start a shot and walk the phases in a background thread."""
        shot_id, _ = self.start_shot(plan)

        def runner():
            import time
            while not self.idle:
                if dwell_ms:
                    time.sleep(dwell_ms / 1000.0)
                try:
                    self.advance()
                except NoActiveShot:
                    return

        threading.Thread(target=runner, name=f"shot-{shot_id}", daemon=True).start()
        return shot_id

    # -- archive ------------------------------------------------------------------

    def attach_wave(self, shot_id: int, wave: dict) -> None:
        with self._lock:
            shot = self._active
            if shot is None or shot.shot_id != shot_id:
                raise UnknownShot(f"{shot_id} not active")
            shot.waves.append(wave)
        self._persist(shot)

    def get_shot(self, shot_id: int) -> ShotRecord:
        with self._lock:
            if self._active is not None and self._active.shot_id == shot_id:
                return self._active
            if shot_id in self._finished:
                return self._finished[shot_id]
        if self.store is not None:
            rec = self.store.get("shot", f"{shot_id:08d}")
            if rec is not None:
                return ShotRecord.from_json(json.loads(rec.payload["blob"].value))
        raise UnknownShot(str(shot_id))


class ShotServant(OpServant):
    def __init__(self, coordinator: ShotCoordinator):
        self.coordinator = coordinator

    def op_register_participant(self, args, ctx):
        self.coordinator.register_participant(args["subsystem"].value,
                                              args["endpoint"].value)
        return {}

    def op_start(self, args, ctx):
        plan = ShotPlan.from_json(json.loads(args["plan"].value))
        shot_id, step = self.coordinator.start_shot(plan)
        return {"shot_id": sv_int(shot_id), "step": sv_text(canonical_json(step))}

    def op_run(self, args, ctx):
        plan = ShotPlan.from_json(json.loads(args["plan"].value))
        dwell = args.get("dwell_ms")
        shot_id = self.coordinator.run_shot_async(
            plan, dwell.value if dwell is not None else 0)
        return {"shot_id": sv_int(shot_id)}

    def op_advance(self, args, ctx):
        return {"step": sv_text(canonical_json(self.coordinator.advance()))}

    def op_abort(self, args, ctx):
        reason = args.get("reason")
        out = self.coordinator.abort(reason.value if reason else "operator abort")
        return {"step": sv_text(canonical_json(out))}

    def op_attach_wave(self, args, ctx):
        self.coordinator.attach_wave(args["shot_id"].value,
                                     json.loads(args["wave"].value))
        return {}

    def op_get(self, args, ctx):
        shot = self.coordinator.get_shot(args["shot_id"].value)
        return {"record": sv_text(canonical_json(shot.to_json()))}

    def op_status(self, args, ctx):
        shot = self.coordinator.current_shot()
        if shot is None:
            return {"active": sv_text("")}
        committed = shot.committed_phases()
        return {"active": sv_text(str(shot.shot_id)),
                "phase": sv_text(committed[-1] if committed else ""),
                "ordinal": sv_int(len(committed))}

"""Linear-motion actuator: constant velocity toward a target, hard limits."""

from __future__ import annotations

from ..values import StatusValue, sv_bool, sv_int, sv_real
from .core import Aborted, BadArgs, DeviceCore, OutOfLimits, _req

SETTLE_EPS_MM = 1e-6


class Motor(DeviceCore):
    kind = "motor"
    OPS = {
        "move_to": ("op_move_to", True),
        "halt": ("op_halt", True),
    }

    def _init_state(self, init_attrs, persisted):
        self.velocity = _req(init_attrs, "velocity", "real")
        self.limit_min = _req(init_attrs, "limit_min", "real")
        self.limit_max = _req(init_attrs, "limit_max", "real")
        self.deadband = _req(init_attrs, "deadband", "real")
        if self.velocity <= 0:
            raise OutOfLimits(f"velocity {self.velocity}")
        if self.limit_min >= self.limit_max:
            raise OutOfLimits(f"limits [{self.limit_min}, {self.limit_max}]")
        default_pos = init_attrs.get("position")
        pos = persisted.get("position", default_pos)
        self.position = pos.value if pos is not None else self.limit_min
        if not self.limit_min <= self.position <= self.limit_max:
            raise OutOfLimits(f"position {self.position} outside limits")
        self.target = self.position
        self.moving = False
        self._move_started_ms = None

    def _register_channels(self):
        self._channel("position", "real", self.deadband)
        self._channel("moving", "bool")

    def state_payload(self):
        return {"position": sv_real(self.position), "target": sv_real(self.target),
                "moving": sv_bool(self.moving), "velocity": sv_real(self.velocity),
                "limit_min": sv_real(self.limit_min), "limit_max": sv_real(self.limit_max)}

    # -- operations ---------------------------------------------------------

    def move_to(self, target: float, key=None) -> dict[str, StatusValue]:
        """Start a move; motion proceeds via sim_tick. Idempotent when
        already at the target."""
        self._check_key(key)
        return self._start_move(target)

    def _start_move(self, target: float) -> dict[str, StatusValue]:
        with self._lock:
            if not self.limit_min <= target <= self.limit_max:
                raise OutOfLimits(f"target {target} outside "
                                  f"[{self.limit_min}, {self.limit_max}]")
            if abs(self.position - target) < SETTLE_EPS_MM:
                return {"completed": sv_bool(True), "eta_ms": sv_int(0)}
            self.target = target
            self.moving = True
            self._move_started_ms = self.clock.now_ms()
            eta_ms = int(abs(target - self.position) / self.velocity * 1000)
            self.mark_dirty()
        self._ingest("moving", True)
        return {"completed": sv_bool(False), "eta_ms": sv_int(eta_ms)}

    def halt(self, key=None) -> dict[str, StatusValue]:
        """Stop a move where it stands; the interrupted move ends Aborted."""
        self._check_key(key)
        return self._do_halt()

    def _do_halt(self) -> dict[str, StatusValue]:
        with self._lock:
            was_moving = self.moving
            self.target = self.position
            self.moving = False
            self._move_started_ms = None
            self.mark_dirty()
        if was_moving:
            self._ingest("moving", False)
            self._ingest("position", self.position)
        return {"was_moving": sv_bool(was_moving)}

    def wait_settled(self, tick, dt_s: float = 0.05, max_s: float = 60.0,
                     target: float | None = None) -> str:
        """Drive `tick(dt)` until the move completes; in-process helper.
        Raises Aborted if the move was halted short of the target."""
        elapsed = 0.0
        if target is None:
            target = self.target
        while elapsed < max_s:
            with self._lock:
                if not self.moving:
                    if abs(self.position - target) < SETTLE_EPS_MM:
                        return "completed"
                    raise Aborted(f"halted at {self.position}")
            tick(dt_s)
            elapsed += dt_s
        raise Aborted("wait_settled timeout")

    def sim_tick(self, dt_s: float) -> None:
        completed = False
        started = None
        with self._lock:
            if self.moving:
                step = self.velocity * dt_s
                delta = self.target - self.position
                if abs(delta) <= step + SETTLE_EPS_MM:
                    self.position = self.target
                    self.moving = False
                    started = self._move_started_ms
                    self._move_started_ms = None
                    completed = True
                else:
                    self.position += step if delta > 0 else -step
                self.position = min(max(self.position, self.limit_min), self.limit_max)
                self.mark_dirty()
            still_moving = self.moving
        if still_moving or completed:
            self._ingest("position", self.position)
        if completed:
            self._ingest("moving", False)
            duration = self.clock.now_ms() - started if started is not None else 0
            self.record_usage({"increment": 1, "service_time_ms": duration})
            self.flush_state()

    # bus op adapters (key already validated by handle)
    def op_move_to(self, args):
        target = args.get("target")
        if target is None or target.tag != "real":
            raise BadArgs("move_to needs a real 'target'")
        return self._start_move(target.value)

    def op_halt(self, args):
        return self._do_halt()

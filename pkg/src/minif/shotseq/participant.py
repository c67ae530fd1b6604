"""Participant side of the shot protocol.

A subsystem's shot behavior is a Strategy: propose answers whether the
subsystem is ready to enter a phase, commit performs the phase work,
safe_abort backs out. The servant adapts a strategy to the bus ops the
coordinator drives.
"""

from __future__ import annotations

import json
import time

from ..values import StatusValue, sv_enum, sv_text
from ..wirebus.node import OpServant


class Strategy:
    """Default strategy: always ready, does nothing. Subclass per subsystem."""

    def propose(self, shot_id: int, phase: str, ordinal: int, params: dict) -> tuple[bool, str]:
        return True, ""

    def commit(self, shot_id: int, phase: str, ordinal: int, params: dict) -> None:
        pass

    def safe_abort(self, shot_id: int) -> None:
        pass


class ScriptedStrategy(Strategy):
    """Vote per phase from a script: "ready", "fail:<reason>", or
    "silent:<ms>" (sleeps through the coordinator's patience)."""

    def __init__(self, script: dict[str, str] | None = None):
        self.script = dict(script or {})
        self.proposes: list[str] = []
        self.commits: list[str] = []
        self.aborts: list[int] = []

    def propose(self, shot_id, phase, ordinal, params):
        self.proposes.append(phase)
        action = self.script.get(phase, "ready")
        if action.startswith("silent:"):
            time.sleep(int(action.split(":", 1)[1]) / 1000.0)
            return True, ""
        if action.startswith("fail"):
            _, _, reason = action.partition(":")
            return False, reason or "scripted failure"
        return True, ""

    def commit(self, shot_id, phase, ordinal, params):
        self.commits.append(phase)

    def safe_abort(self, shot_id):
        self.aborts.append(shot_id)


class ParticipantServant(OpServant):
    def __init__(self, strategy: Strategy):
        self.strategy = strategy

    @staticmethod
    def _params(args) -> dict:
        raw = args.get("params")
        return json.loads(raw.value) if raw is not None else {}

    def op_propose(self, args, ctx):
        ready, reason = self.strategy.propose(
            args["shot_id"].value, args["phase"].value, args["ordinal"].value,
            self._params(args))
        if ready:
            return {"vote": sv_enum("ready")}
        return {"vote": sv_enum("fail"), "reason": sv_text(reason)}

    def op_commit(self, args, ctx):
        self.strategy.commit(args["shot_id"].value, args["phase"].value,
                             args["ordinal"].value, self._params(args))
        return {}

    def op_safe_abort(self, args, ctx):
        self.strategy.safe_abort(args["shot_id"].value)
        return {}

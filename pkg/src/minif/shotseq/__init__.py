"""Shot life cycle: nine-phase FSM, participant strategies, shot archive."""

from .phases import PHASES, FIRE_ORDINAL, ordinal_of, phase_name
from .coordinator import (ShotCoordinator, ShotServant, ShotPlan, ShotRecord,
                          ShotInProgress, UnknownParticipant, NoActiveShot,
                          UnknownShot, Duplicate)
from .participant import ParticipantServant, ScriptedStrategy, Strategy

__all__ = [
    "PHASES", "FIRE_ORDINAL", "ordinal_of", "phase_name",
    "ShotCoordinator", "ShotServant", "ShotPlan", "ShotRecord",
    "ShotInProgress", "UnknownParticipant", "NoActiveShot", "UnknownShot",
    "Duplicate", "ParticipantServant", "ScriptedStrategy", "Strategy",
]

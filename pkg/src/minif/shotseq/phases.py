"""The nine shot phases, in firing order, plus the idle resting state.

Phase names are data; everything else keys off ordinals (1-based), so a
rename never touches logic. Aborts before the fire ordinal return the
machine to idle; at or after it, data acquisition still completes.
"""

PHASES = ("setup", "participant_check", "prepare", "verify", "arm",
          "countdown", "fire", "postshot", "analyze")

IDLE = "idle"
FIRE_ORDINAL = PHASES.index("fire") + 1        # 7


def ordinal_of(phase: str) -> int:
    return PHASES.index(phase) + 1


def phase_name(ordinal: int) -> str:
    return PHASES[ordinal - 1]

"""In-process status monitor: ingest raw samples, publish the interesting ones.

A sample publishes iff (a) it is the channel's first sample, (b) it differs
from the last PUBLISHED value by at least the deadband (numeric) or at all
(discrete), or (c) the heartbeat interval elapsed since the last publication.
Comparing against the last published value rather than the last sample means
slow drifts still get out eventually.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

from ..clock import Clock, WALL, format_ts, parse_ts
from ..errors import MinifError
from ..values import DISCRETE_TAGS, StatusValue, sv_enum, sv_int, sv_text, wrap

TOPIC_PREFIX = "status."
DEFAULT_INTERVAL_MS = 10_000
MIN_INTERVAL_MS = 100


class UnknownChannel(MinifError):
    pass


class BadConfig(MinifError):
    pass


class TagMismatch(MinifError):
    pass


@dataclass
class ChannelConfig:
    channel: str                      # "<taxon>.<field>"
    deadband: float = 0.0
    max_interval_ms: int = DEFAULT_INTERVAL_MS


@dataclass
class StatusUpdate:
    channel: str
    value: StatusValue
    ts: int                           # epoch ms
    seq: int
    reason: str                       # initial | delta | heartbeat

    def to_payload(self) -> dict[str, StatusValue]:
        return {"channel": sv_text(self.channel), "value": self.value,
                "ts": sv_text(format_ts(self.ts)), "seq": sv_int(self.seq),
                "reason": sv_enum(self.reason)}

    @classmethod
    def from_args(cls, args: dict[str, StatusValue]) -> "StatusUpdate":
        return cls(channel=args["channel"].value, value=args["value"],
                   ts=parse_ts(args["ts"].value), seq=args["seq"].value,
                   reason=args["reason"].value)


class _Channel:
    __slots__ = ("tag", "deadband", "max_interval_ms", "seq",
                 "last_published", "last_published_ts")

    def __init__(self, tag: str, deadband: float, max_interval_ms: int):
        self.tag = tag
        self.deadband = deadband
        self.max_interval_ms = max_interval_ms
        self.seq = 0
        self.last_published: Optional[StatusValue] = None
        self.last_published_ts: Optional[int] = None


def _exceeds_deadband(tag: str, new: StatusValue, old: StatusValue, deadband: float) -> bool:
    if tag in DISCRETE_TAGS:
        return new.value != old.value
    if tag == "vector-of-real":
        a, b = new.value, old.value
        if len(a) != len(b):
            return True
        return any(abs(x - y) >= deadband for x, y in zip(a, b)) if deadband > 0 \
            else a != b
    if deadband > 0:
        return abs(new.value - old.value) >= deadband
    return new.value != old.value


class StatusMonitor:
    """One per FEP process. `publish(topic, payload, retain)` is injected;
    ingest per channel is serialized, distinct channels are independent."""

    def __init__(self, publish: Callable[[str, dict, bool], None] | None = None,
                 clock: Clock = WALL):
        self._publish = publish
        self.clock = clock
        self._channels: dict[str, _Channel] = {}
        self._lock = threading.Lock()

    def register_channel(self, channel: str, tag: str, deadband: float = 0.0,
                         max_interval_ms: int = DEFAULT_INTERVAL_MS) -> None:
        self._validate(tag, deadband, max_interval_ms)
        if tag in DISCRETE_TAGS:
            deadband = 0.0
        with self._lock:
            self._channels[channel] = _Channel(tag, deadband, max_interval_ms)

    def configure_channel(self, cfg: ChannelConfig) -> None:
        with self._lock:
            ch = self._channels.get(cfg.channel)
            if ch is None:
                raise UnknownChannel(cfg.channel)
            self._validate(ch.tag, cfg.deadband, cfg.max_interval_ms)
            ch.deadband = 0.0 if ch.tag in DISCRETE_TAGS else cfg.deadband
            ch.max_interval_ms = cfg.max_interval_ms

    @staticmethod
    def _validate(tag: str, deadband, max_interval_ms):
        if not isinstance(deadband, (int, float)) or deadband < 0:
            raise BadConfig(f"deadband {deadband!r}")
        if not isinstance(max_interval_ms, int) or max_interval_ms < MIN_INTERVAL_MS:
            raise BadConfig(f"max_interval_ms {max_interval_ms!r}")
        if tag not in ("int", "real", "bool", "text", "enum", "vector-of-real"):
            raise BadConfig(f"tag {tag!r}")

    def channels(self, prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(c for c in self._channels if c.startswith(prefix))

    def has_channel(self, channel: str) -> bool:
        with self._lock:
            return channel in self._channels

    def ingest(self, channel: str, value, ts_ms: int | None = None) -> StatusUpdate | None:
        sv = wrap(value)
        with self._lock:
            ch = self._channels.get(channel)
            if ch is None:
                raise UnknownChannel(channel)
            if sv.tag != ch.tag:
                raise TagMismatch(f"{channel}: {sv.tag} != {ch.tag}")
            ts = ts_ms if ts_ms is not None else self.clock.now_ms()
            if ch.last_published is None:
                reason = "initial"
            elif _exceeds_deadband(ch.tag, sv, ch.last_published, ch.deadband):
                reason = "delta"
            elif ts - ch.last_published_ts >= ch.max_interval_ms:
                reason = "heartbeat"
            else:
                return None
            ch.seq += 1
            update = StatusUpdate(channel=channel, value=sv, ts=ts,
                                  seq=ch.seq, reason=reason)
            ch.last_published = sv
            ch.last_published_ts = ts
        if self._publish is not None:
            self._publish(TOPIC_PREFIX + channel, update.to_payload(), True)
        return update

    def snapshot(self, prefix: str = "") -> dict[str, StatusUpdate]:
        """Latest published value per matching channel; pure read."""
        out = {}
        with self._lock:
            for name, ch in self._channels.items():
                if name.startswith(prefix) and ch.last_published is not None:
                    out[name] = StatusUpdate(channel=name, value=ch.last_published,
                                             ts=ch.last_published_ts, seq=ch.seq,
                                             reason="initial")
        return out

    def last_published(self, channel: str) -> StatusValue | None:
        with self._lock:
            ch = self._channels.get(channel)
            if ch is None:
                raise UnknownChannel(channel)
            return ch.last_published

"""Data-type independent tagged value containers.

Every attribute that crosses the wire or lands in the persistent store is a
StatusValue: a (tag, payload) pair with tag one of int, real, bool, text,
enum, vector-of-real. Canonical JSON rendering (sorted keys, no insignificant
whitespace) makes encodings byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable

from .errors import MinifError

TAGS = ("int", "real", "bool", "text", "enum", "vector-of-real")
DISCRETE_TAGS = ("bool", "text", "enum")
MAX_VECTOR = 65_536


class BadValue(MinifError):
    pass


@dataclass(frozen=True)
class StatusValue:
    tag: str
    value: Any

    def __post_init__(self):
        object.__setattr__(self, "value", _check(self.tag, self.value))

    def to_json(self) -> dict:
        v = list(self.value) if self.tag == "vector-of-real" else self.value
        return {"tag": self.tag, "value": v}

    @classmethod
    def from_json(cls, obj: Any) -> "StatusValue":
        if not isinstance(obj, dict) or set(obj) != {"tag", "value"}:
            raise BadValue(f"not a tagged value: {obj!r}")
        return cls(obj["tag"], obj["value"])


def _check(tag: str, value: Any) -> Any:
    if tag == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise BadValue(f"int tag with {value!r}")
        return value
    if tag == "real":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadValue(f"real tag with {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise BadValue("real must be finite")
        return value
    if tag == "bool":
        if not isinstance(value, bool):
            raise BadValue(f"bool tag with {value!r}")
        return value
    if tag in ("text", "enum"):
        if not isinstance(value, str):
            raise BadValue(f"{tag} tag with {value!r}")
        return value
    if tag == "vector-of-real":
        if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
            raise BadValue(f"vector tag with {value!r}")
        out = []
        for x in value:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(float(x)):
                raise BadValue(f"vector element {x!r}")
            out.append(float(x))
        if len(out) > MAX_VECTOR:
            raise BadValue(f"vector length {len(out)} > {MAX_VECTOR}")
        return tuple(out)
    raise BadValue(f"unknown tag {tag!r}")


def sv_int(v: int) -> StatusValue:
    return StatusValue("int", v)


def sv_real(v: float) -> StatusValue:
    return StatusValue("real", v)


def sv_bool(v: bool) -> StatusValue:
    return StatusValue("bool", v)


def sv_text(v: str) -> StatusValue:
    return StatusValue("text", v)


def sv_enum(v: str) -> StatusValue:
    return StatusValue("enum", v)


def sv_vector(v) -> StatusValue:
    return StatusValue("vector-of-real", v)


def wrap(v: Any) -> StatusValue:
    """Wrap a plain python value by its natural tag; enums need sv_enum."""
    if isinstance(v, StatusValue):
        return v
    if isinstance(v, bool):
        return StatusValue("bool", v)
    if isinstance(v, int):
        return StatusValue("int", v)
    if isinstance(v, float):
        return StatusValue("real", v)
    if isinstance(v, str):
        return StatusValue("text", v)
    if isinstance(v, (list, tuple)):
        return StatusValue("vector-of-real", v)
    raise BadValue(f"cannot wrap {type(v).__name__}")


def unwrap(sv: StatusValue) -> Any:
    return list(sv.value) if sv.tag == "vector-of-real" else sv.value


# An attribute map: text keys -> StatusValue.
AttrMap = "dict[str, StatusValue]"


def attrs(**kw) -> dict[str, StatusValue]:
    return {k: wrap(v) for k, v in kw.items()}


def attrs_to_json(m: dict[str, StatusValue]) -> dict:
    return {k: v.to_json() for k, v in m.items()}


def attrs_from_json(obj: Any) -> dict[str, StatusValue]:
    if not isinstance(obj, dict):
        raise BadValue(f"attr map must be an object, got {type(obj).__name__}")
    out = {}
    for k, v in obj.items():
        if not isinstance(k, str):
            raise BadValue(f"attr key {k!r}")
        out[k] = StatusValue.from_json(v)
    return out


def plain(m: dict[str, StatusValue]) -> dict[str, Any]:
    return {k: unwrap(v) for k, v in m.items()}


def canonical_json(obj: Any) -> str:
    """Deterministic text rendering: sorted keys, compact separators, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)

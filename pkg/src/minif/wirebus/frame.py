"""Wire-level message unit and its canonical byte encoding.

Layout: 4-byte big-endian unsigned body length, then the body — canonical
UTF-8 JSON with keys sorted ascending by byte value and no insignificant
whitespace. Fields: v, id, kind, target, op, args, key (omitted when
absent), ts. Equal frames always yield byte-identical encodings.
"""

from __future__ import annotations

import json
import struct
import uuid
from dataclasses import dataclass, field

from ..clock import TS_RE, WALL
from ..values import BadValue, StatusValue, attrs_from_json, attrs_to_json, canonical_json
from .errors import BadEncoding, FrameTooLarge, InvalidField, Truncated, UnknownKind

KINDS = ("req", "rep", "err", "evt", "hb")
MAX_BODY = 16 * 1024 * 1024
MAX_ID = 64


def new_id() -> str:
    return uuid.uuid4().hex


def now_ts() -> str:
    return WALL.now_ts()


@dataclass
class Frame:
    kind: str
    target: str
    op: str = ""
    args: dict[str, StatusValue] = field(default_factory=dict)
    id: str = field(default_factory=new_id)
    key: str | None = None
    ts: str = field(default_factory=now_ts)
    version: int = 1

    def reply(self, args: dict[str, StatusValue] | None = None) -> "Frame":
        return Frame(kind="rep", target=self.target, op=self.op,
                     args=args or {}, id=self.id)

    def error(self, code: str, detail: str = "") -> "Frame":
        return Frame(kind="err", target=self.target, op=self.op,
                     args={"code": StatusValue("text", code),
                           "detail": StatusValue("text", detail)},
                     id=self.id)


def _validate(f: Frame) -> None:
    if f.version != 1:
        raise InvalidField(f"version {f.version!r}")
    if f.kind not in KINDS:
        raise InvalidField(f"kind {f.kind!r}")
    if not isinstance(f.id, str) or not 1 <= len(f.id) <= MAX_ID:
        raise InvalidField(f"id {f.id!r}")
    if not isinstance(f.target, str) or not f.target:
        raise InvalidField("empty target")
    if not isinstance(f.op, str):
        raise InvalidField("op must be text")
    if f.key is not None and not isinstance(f.key, str):
        raise InvalidField("key must be text")
    if not isinstance(f.ts, str) or not TS_RE.match(f.ts):
        raise InvalidField(f"ts {f.ts!r}")
    if not isinstance(f.args, dict):
        raise InvalidField("args must be a map")
    for k, v in f.args.items():
        if not isinstance(k, str) or not isinstance(v, StatusValue):
            raise InvalidField(f"bad arg {k!r}")


def encode_frame(f: Frame) -> bytes:
    _validate(f)
    body = {
        "v": f.version,
        "id": f.id,
        "kind": f.kind,
        "target": f.target,
        "op": f.op,
        "args": attrs_to_json(f.args),
        "ts": f.ts,
    }
    if f.key is not None:
        body["key"] = f.key
    data = canonical_json(body).encode("utf-8")
    if len(data) > MAX_BODY:
        raise FrameTooLarge(f"body {len(data)} bytes")
    return struct.pack(">I", len(data)) + data


def decode_frame(b: bytes) -> Frame:
    if len(b) < 4:
        raise Truncated(f"{len(b)} bytes")
    (n,) = struct.unpack(">I", b[:4])
    if len(b) < 4 + n:
        raise Truncated(f"prefix says {n}, have {len(b) - 4}")
    return decode_body(b[4:4 + n])


def decode_body(data: bytes) -> Frame:
    if len(data) > MAX_BODY:
        raise FrameTooLarge(f"body {len(data)} bytes")
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BadEncoding(str(e)) from None
    if not isinstance(obj, dict):
        raise BadEncoding("body is not an object")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise UnknownKind(repr(kind))
    try:
        f = Frame(
            kind=kind,
            target=obj["target"],
            op=obj.get("op", ""),
            args=attrs_from_json(obj.get("args", {})),
            id=obj["id"],
            key=obj.get("key"),
            ts=obj["ts"],
            version=obj.get("v", 0),
        )
        _validate(f)
    except (KeyError, BadValue, InvalidField, TypeError) as e:
        raise BadEncoding(str(e)) from None
    return f


def read_frame(read_exactly) -> Frame:
    """Read one frame from a stream; `read_exactly(n)` must return n bytes or raise."""
    header = read_exactly(4)
    (n,) = struct.unpack(">I", header)
    if n > MAX_BODY:
        raise FrameTooLarge(f"body {n} bytes")
    return decode_body(read_exactly(n))

"""File-backed table store: append-only log, snapshot compaction, XML port.

Log and snapshot share one line format:

    ts|class|id|version|payload-canonical-json|crc32-hex

The crc covers everything before its own field, so a torn final line (the
only kind a crash mid-append can produce; acks happen after fsync) is
detected and discarded on recovery. A checksum failure anywhere earlier is
real corruption and the store refuses to serve.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import xml.etree.ElementTree as ET
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..clock import Clock, WALL
from ..errors import MinifError
from ..values import (BadValue, StatusValue, attrs_from_json, attrs_to_json,
                      canonical_json)

log = logging.getLogger(__name__)

DEFAULT_CLASSES = ("devrec", "manifest", "resv", "alert", "alerttx",
                   "logrec", "histev", "shot", "trace")


class VersionConflict(MinifError):
    pass


class StorageFailure(MinifError):
    pass


class CorruptStore(MinifError):
    pass


class UnknownClass(MinifError):
    pass


class BadDocument(MinifError):
    pass


@dataclass
class PersistentRecord:
    cls: str
    id: str
    version: int
    payload: dict[str, StatusValue]


def _crc(text: str) -> str:
    return f"{zlib.crc32(text.encode('utf-8')) & 0xFFFFFFFF:08x}"


def _check_ident(kind: str, value: str):
    if not value or "|" in value or "\n" in value or "\r" in value:
        raise StorageFailure(f"bad {kind}: {value!r}")


class Store:
    """One partition's tables. Writes are serialized; reads hit the
    in-memory latest map rebuilt by recover()."""

    def __init__(self, data_dir: str | Path, partition: str = "main",
                 classes=DEFAULT_CLASSES, fsync: bool = True, clock: Clock = WALL):
        self.data_dir = Path(data_dir)
        self.partition = partition
        self.classes: Optional[set[str]] = set(classes) if classes is not None else None
        self.fsync = fsync
        self.clock = clock
        self.log_path = self.data_dir / f"{partition}.log"
        self.snap_path = self.data_dir / f"{partition}.snap"
        self._latest: dict[tuple[str, str], tuple[int, dict[str, StatusValue]]] = {}
        self._lock = threading.RLock()
        self._log_fd: Optional[int] = None
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.recover()

    # -- recovery ----------------------------------------------------------

    def recover(self) -> None:
        with self._lock:
            if self._log_fd is not None:
                os.close(self._log_fd)
                self._log_fd = None
            self._latest = {}
            if self.snap_path.exists():
                self._replay(self.snap_path, allow_torn_tail=False)
            good_bytes = 0
            if self.log_path.exists():
                good_bytes = self._replay(self.log_path, allow_torn_tail=True)
                if good_bytes < self.log_path.stat().st_size:
                    log.warning("discarding torn log tail (%d bytes)",
                                self.log_path.stat().st_size - good_bytes)
                    with open(self.log_path, "r+b") as f:
                        f.truncate(good_bytes)
                        f.flush()
                        os.fsync(f.fileno())
            self._log_fd = os.open(self.log_path, os.O_WRONLY | os.O_CREAT | os.O_APPEND)

    def _replay(self, path: Path, allow_torn_tail: bool) -> int:
        good = 0
        with open(path, "rb") as f:
            raw = f.read()
        offset = 0
        while offset < len(raw):
            nl = raw.find(b"\n", offset)
            if nl < 0:
                if allow_torn_tail:
                    return good
                raise CorruptStore(f"{path.name}: unterminated final line")
            try:
                line = raw[offset:nl].decode("utf-8")
                rec = self._parse_line(line)
            except (UnicodeDecodeError, CorruptStore):
                if allow_torn_tail and raw.find(b"\n", nl + 1) < 0:
                    return good
                raise CorruptStore(f"{path.name}: bad checksum before final line")
            self._latest[(rec.cls, rec.id)] = (rec.version, rec.payload)
            offset = nl + 1
            good = offset
        return good

    @staticmethod
    def _parse_line(line: str) -> PersistentRecord:
        parts = line.split("|")
        if len(parts) < 6:
            raise CorruptStore("short line")
        ts, cls, rid, version = parts[0], parts[1], parts[2], parts[3]
        crc = parts[-1]
        payload_text = "|".join(parts[4:-1])
        body = "|".join([ts, cls, rid, version, payload_text])
        if _crc(body) != crc:
            raise CorruptStore("checksum mismatch")
        try:
            payload = attrs_from_json(json.loads(payload_text))
            return PersistentRecord(cls, rid, int(version), payload)
        except (json.JSONDecodeError, BadValue, ValueError) as e:
            raise CorruptStore(f"bad record body: {e}") from None

    # -- writes ------------------------------------------------------------

    def _format_line(self, cls: str, rid: str, version: int,
                     payload: dict[str, StatusValue]) -> str:
        body = "|".join([self.clock.now_ts(), cls, rid, str(version),
                         canonical_json(attrs_to_json(payload))])
        return f"{body}|{_crc(body)}\n"

    def _check_class(self, cls: str):
        _check_ident("class", cls)
        if self.classes is not None and cls not in self.classes:
            raise UnknownClass(cls)

    def put(self, cls: str, rid: str, payload: dict[str, StatusValue],
            expected_version: int | None = None) -> int:
        return self.put_many([(cls, rid, payload, expected_version)])[0]

    def put_many(self, records) -> list[int]:
        """Append a batch with one fsync; ack (return) implies durability."""
        with self._lock:
            lines = []
            versions = []
            staged = []
            for rec in records:
                cls, rid, payload = rec[0], rec[1], rec[2]
                expected = rec[3] if len(rec) > 3 else None
                self._check_class(cls)
                _check_ident("id", rid)
                current = self._latest.get((cls, rid), (0, None))[0]
                if expected is not None and expected != current:
                    raise VersionConflict(f"{cls}/{rid}: expected {expected}, at {current}")
                version = current + 1
                # records within one batch may stack on the same id
                for prior_cls, prior_rid, prior_ver in reversed(staged):
                    if (prior_cls, prior_rid) == (cls, rid):
                        version = prior_ver + 1
                        break
                lines.append(self._format_line(cls, rid, version, payload))
                versions.append(version)
                staged.append((cls, rid, version))
            data = "".join(lines).encode("utf-8")
            try:
                os.write(self._log_fd, data)
                if self.fsync:
                    os.fsync(self._log_fd)
            except OSError as e:
                raise StorageFailure(str(e)) from None
            for rec, version in zip(records, versions):
                payload = dict(rec[2])
                self._latest[(rec[0], rec[1])] = (version, payload)
            return versions

    # -- reads ---------------------------------------------------------------

    def get(self, cls: str, rid: str) -> PersistentRecord | None:
        with self._lock:
            entry = self._latest.get((cls, rid))
            if entry is None:
                return None
            version, payload = entry
            return PersistentRecord(cls, rid, version, dict(payload))

    def load_class(self, cls: str) -> list[PersistentRecord]:
        with self._lock:
            return [PersistentRecord(c, i, v, dict(p))
                    for (c, i), (v, p) in sorted(self._latest.items())
                    if c == cls]

    def count(self) -> int:
        with self._lock:
            return len(self._latest)

    # -- snapshot --------------------------------------------------------------

    def snapshot(self) -> None:
        """Fold the log into the snapshot; state is unchanged, recovery gets
        cheaper. Aborting mid-way leaves the previous snapshot+log intact."""
        with self._lock:
            tmp = self.snap_path.with_suffix(".snap.tmp")
            try:
                with open(tmp, "w", encoding="utf-8") as f:
                    for (cls, rid), (version, payload) in sorted(self._latest.items()):
                        f.write(self._format_line(cls, rid, version, payload))
                    f.flush()
                    os.fsync(f.fileno())
                os.replace(tmp, self.snap_path)
                self._sync_dir()
                os.close(self._log_fd)
                with open(self.log_path, "w") as f:
                    f.flush()
                    os.fsync(f.fileno())
                self._log_fd = os.open(self.log_path, os.O_WRONLY | os.O_CREAT | os.O_APPEND)
            except OSError as e:
                tmp.unlink(missing_ok=True)
                raise StorageFailure(str(e)) from None

    def _sync_dir(self):
        fd = os.open(self.data_dir, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)

    # -- XML port ----------------------------------------------------------------

    def export_xml(self, classes) -> str:
        root = ET.Element("objects")
        with self._lock:
            for cls in classes:
                cls_el = ET.SubElement(root, "class", name=cls)
                for rec in self.load_class(cls):
                    obj = ET.SubElement(cls_el, "object", id=rec.id,
                                        version=str(rec.version))
                    for name in sorted(rec.payload):
                        sv = rec.payload[name]
                        attr = ET.SubElement(obj, "attr", name=name, tag=sv.tag)
                        attr.text = render_value(sv)
        return ET.tostring(root, encoding="unicode")

    def import_xml(self, document: str) -> int:
        """All-or-nothing: a malformed element means zero puts applied."""
        try:
            root = ET.fromstring(document)
        except ET.ParseError as e:
            raise BadDocument(str(e)) from None
        if root.tag != "objects":
            raise BadDocument(f"root element {root.tag!r}")
        staged = []
        for cls_el in root:
            if cls_el.tag != "class" or "name" not in cls_el.attrib:
                raise BadDocument(f"unexpected element {cls_el.tag!r}")
            cls = cls_el.attrib["name"]
            for obj in cls_el:
                if obj.tag != "object" or "id" not in obj.attrib:
                    raise BadDocument(f"unexpected element {obj.tag!r}")
                payload = {}
                for attr in obj:
                    if attr.tag != "attr" or "name" not in attr.attrib or "tag" not in attr.attrib:
                        raise BadDocument(f"unexpected element {attr.tag!r}")
                    try:
                        payload[attr.attrib["name"]] = parse_value(
                            attr.attrib["tag"], attr.text or "")
                    except (BadValue, ValueError) as e:
                        raise BadDocument(str(e)) from None
                staged.append((cls, obj.attrib["id"], payload))
        self.put_many(staged)
        return len(staged)

    def close(self):
        with self._lock:
            if self._log_fd is not None:
                os.close(self._log_fd)
                self._log_fd = None


def render_value(sv: StatusValue) -> str:
    if sv.tag == "int":
        return str(sv.value)
    if sv.tag == "real":
        return repr(sv.value)
    if sv.tag == "bool":
        return "true" if sv.value else "false"
    if sv.tag in ("text", "enum"):
        return sv.value
    if sv.tag == "vector-of-real":
        return ",".join(repr(x) for x in sv.value)
    raise BadValue(sv.tag)


def parse_value(tag: str, text: str) -> StatusValue:
    if tag == "int":
        return StatusValue("int", int(text))
    if tag == "real":
        return StatusValue("real", float(text))
    if tag == "bool":
        if text not in ("true", "false"):
            raise BadValue(f"bool text {text!r}")
        return StatusValue("bool", text == "true")
    if tag in ("text", "enum"):
        return StatusValue(tag, text)
    if tag == "vector-of-real":
        parts = [p for p in text.split(",") if p != ""]
        return StatusValue("vector-of-real", [float(p) for p in parts])
    raise BadValue(f"unknown tag {tag!r}")

"""Reservation service: one live entry per control point, keyed mutations.

All requests are applied under one lock in total order; that lock IS the
mutual-exclusion backbone, and the audit trail it emits is a linearization
that tests can replay. Entries persist (class "resv") so a service restart
recovers live reservations.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from ..clock import Clock, WALL
from ..errors import MinifError
from ..values import (StatusValue, canonical_json, sv_bool, sv_int, sv_text,
                      sv_enum)
from ..wirebus.node import OpServant

SERVICE_NAME = "svc.reserve"
TOPIC_BROKEN = "reserve.broken"


class AlreadyReserved(MinifError):
    pass


class UnknownTaxon(MinifError):
    pass


class UnknownKey(MinifError):
    pass


class NotReserved(MinifError):
    pass


class PartialConflict(MinifError):
    def __init__(self, held):
        # reconstructed from the wire, `held` arrives as its own JSON detail
        if isinstance(held, str):
            try:
                held = json.loads(held)
            except json.JSONDecodeError:
                held = [held]
        self.held = sorted(held)
        super().__init__(canonical_json(self.held))


@dataclass
class ReservationEntry:
    taxon: str
    key: str                       # 32 hex chars
    holder: str
    acquired_at: int               # epoch ms
    lease_ms: Optional[int] = None
    group_id: Optional[str] = None

    def expired(self, now_ms: int) -> bool:
        return self.lease_ms is not None and now_ms - self.acquired_at >= self.lease_ms

    def to_payload(self) -> dict[str, StatusValue]:
        payload = {"live": sv_bool(True), "key": sv_text(self.key),
                   "holder": sv_text(self.holder), "acquired_at": sv_int(self.acquired_at)}
        if self.lease_ms is not None:
            payload["lease_ms"] = sv_int(self.lease_ms)
        if self.group_id is not None:
            payload["group_id"] = sv_text(self.group_id)
        return payload


def new_key() -> str:
    return secrets.token_hex(16)


class ReservationService:
    def __init__(self, store=None, clock: Clock = WALL,
                 audit: Callable[[dict], None] | None = None,
                 publish: Callable[[str, dict], None] | None = None,
                 taxon_exists: Callable[[str], bool] | None = None):
        self.store = store
        self.clock = clock
        self._audit_cb = audit
        self._publish = publish
        self._taxon_exists = taxon_exists
        self._entries: dict[str, ReservationEntry] = {}
        self._lock = threading.Lock()
        if store is not None:
            self._recover()

    def _recover(self):
        for rec in self.store.load_class("resv"):
            p = rec.payload
            if not p.get("live", sv_bool(False)).value:
                continue
            lease = p.get("lease_ms")
            group = p.get("group_id")
            self._entries[rec.id] = ReservationEntry(
                taxon=rec.id, key=p["key"].value, holder=p["holder"].value,
                acquired_at=p["acquired_at"].value,
                lease_ms=lease.value if lease else None,
                group_id=group.value if group else None)

    def _persist(self, taxon: str, entry: ReservationEntry | None):
        if self.store is None:
            return
        payload = entry.to_payload() if entry else {"live": sv_bool(False)}
        self.store.put("resv", taxon, payload)

    def _audit(self, op: str, **fields):
        if self._audit_cb is not None:
            record = {"op": op, "ts": self.clock.now_ms()}
            record.update(fields)
            self._audit_cb(record)

    def _live_entry(self, taxon: str) -> ReservationEntry | None:
        entry = self._entries.get(taxon)
        if entry is None or entry.expired(self.clock.now_ms()):
            return None
        return entry

    # -- operations --------------------------------------------------------

    def reserve(self, taxon: str, holder: str, lease_ms: int | None = None,
                _group_id: str | None = None, _key: str | None = None) -> str:
        if self._taxon_exists is not None and not self._taxon_exists(taxon):
            raise UnknownTaxon(taxon)
        with self._lock:
            current = self._live_entry(taxon)
            if current is not None:
                self._audit("reserve", taxon=taxon, holder=holder, outcome="conflict",
                            current_holder=current.holder)
                raise AlreadyReserved(current.holder)
            entry = ReservationEntry(taxon=taxon, key=_key or new_key(), holder=holder,
                                     acquired_at=self.clock.now_ms(),
                                     lease_ms=lease_ms, group_id=_group_id)
            self._entries[taxon] = entry
            self._persist(taxon, entry)
            self._audit("reserve", taxon=taxon, holder=holder, outcome="ok",
                        key=entry.key)
            return entry.key

    def release(self, key: str, taxon: str | None = None) -> None:
        """Release by key; a group key with no taxon frees every member."""
        with self._lock:
            now = self.clock.now_ms()
            matches = [t for t, e in self._entries.items()
                       if e.key == key and not e.expired(now)]
            if taxon is not None:
                matches = [t for t in matches if t == taxon]
            if not matches:
                self._audit("release", key=key, outcome="unknown")
                raise UnknownKey(key)
            for t in matches:
                holder = self._entries[t].holder
                del self._entries[t]
                self._persist(t, None)
                self._audit("release", taxon=t, holder=holder, key=key, outcome="ok")

    def validate(self, taxon: str, key: str | None) -> str | None:
        """Holder identity when (taxon, key) matches a live entry, else None."""
        with self._lock:
            entry = self._live_entry(taxon)
            valid = entry is not None and key is not None and entry.key == key
            self._audit("validate", taxon=taxon, key=key or "",
                        outcome="valid" if valid else "invalid")
            return entry.holder if valid else None

    def reserve_group(self, taxons, holder: str, lease_ms: int | None = None) -> str:
        """All-or-nothing acquisition of a set under one shared key."""
        taxons = sorted(set(taxons))
        if not taxons:
            raise MinifError("empty taxon set")
        if self._taxon_exists is not None:
            missing = [t for t in taxons if not self._taxon_exists(t)]
            if missing:
                raise UnknownTaxon(canonical_json(missing))
        with self._lock:
            now = self.clock.now_ms()
            held = [t for t in taxons if self._live_entry(t) is not None]
            if held:
                self._audit("reserve_group", holder=holder, outcome="conflict",
                            held=canonical_json(held))
                raise PartialConflict(held)
            key = new_key()
            group_id = new_key()
            for t in taxons:
                entry = ReservationEntry(taxon=t, key=key, holder=holder,
                                         acquired_at=now, lease_ms=lease_ms,
                                         group_id=group_id)
                self._entries[t] = entry
                self._persist(t, entry)
            self._audit("reserve_group", holder=holder, outcome="ok", key=key,
                        taxons=canonical_json(taxons))
            return key

    def break_reservation(self, taxon: str, admin_identity: str, reason: str) -> None:
        with self._lock:
            entry = self._live_entry(taxon)
            if entry is None:
                raise NotReserved(taxon)
            del self._entries[taxon]
            self._persist(taxon, None)
            self._audit("break", taxon=taxon, holder=entry.holder,
                        admin=admin_identity, reason=reason, outcome="ok")
        if self._publish is not None:
            self._publish(TOPIC_BROKEN, {"taxon": taxon, "holder": entry.holder,
                                         "admin": admin_identity, "reason": reason})

    def holder_of(self, taxon: str) -> str | None:
        with self._lock:
            entry = self._live_entry(taxon)
            return entry.holder if entry else None

    def entries(self) -> list[ReservationEntry]:
        with self._lock:
            now = self.clock.now_ms()
            return [e for e in self._entries.values() if not e.expired(now)]


class ReserveServant(OpServant):
    """Bus face: ops reserve/release/validate/reserve_group/break/list."""

    def __init__(self, service: ReservationService):
        self.service = service

    def op_reserve(self, args, ctx):
        lease = args.get("lease_ms")
        key = self.service.reserve(args["taxon"].value, args["holder"].value,
                                   lease.value if lease else None)
        return {"key": sv_text(key)}

    def op_release(self, args, ctx):
        taxon = args.get("taxon")
        self.service.release(args["key"].value, taxon.value if taxon else None)
        return {}

    def op_validate(self, args, ctx):
        key = args.get("key")
        holder = self.service.validate(args["taxon"].value, key.value if key else None)
        if holder is None:
            return {"valid": sv_bool(False)}
        return {"valid": sv_bool(True), "holder": sv_text(holder)}

    def op_reserve_group(self, args, ctx):
        lease = args.get("lease_ms")
        key = self.service.reserve_group(json.loads(args["taxons"].value),
                                         args["holder"].value,
                                         lease.value if lease else None)
        return {"key": sv_text(key)}

    def op_break(self, args, ctx):
        self.service.break_reservation(args["taxon"].value, args["admin"].value,
                                       args["reason"].value)
        return {}

    def op_list(self, args, ctx):
        entries = [{"taxon": e.taxon, "holder": e.holder, "group_id": e.group_id,
                    "acquired_at": e.acquired_at, "lease_ms": e.lease_ms}
                   for e in self.service.entries()]
        return {"entries": sv_text(canonical_json(entries))}

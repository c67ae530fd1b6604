"""Bus client for the reservation service."""

from __future__ import annotations

import json

from ..errors import RemoteError, typed_error
from ..values import canonical_json
from .service import SERVICE_NAME


class ReserveClient:
    def __init__(self, node, timeout_ms: int = 5000):
        self.node = node
        self.timeout_ms = timeout_ms

    def _invoke(self, op, args):
        try:
            return self.node.invoke(SERVICE_NAME, op, args, timeout_ms=self.timeout_ms)
        except RemoteError as e:
            raise typed_error(e.code, e.detail) from None

    def reserve(self, taxon: str, holder: str, lease_ms: int | None = None) -> str:
        args = {"taxon": taxon, "holder": holder}
        if lease_ms is not None:
            args["lease_ms"] = lease_ms
        return self._invoke("reserve", args)["key"].value

    def release(self, key: str, taxon: str | None = None) -> None:
        args = {"key": key}
        if taxon is not None:
            args["taxon"] = taxon
        self._invoke("release", args)

    def validate(self, taxon: str, key: str | None) -> str | None:
        args = {"taxon": taxon}
        if key is not None:
            args["key"] = key
        out = self._invoke("validate", args)
        return out["holder"].value if out["valid"].value else None

    def reserve_group(self, taxons, holder: str, lease_ms: int | None = None) -> str:
        args = {"taxons": canonical_json(sorted(set(taxons))), "holder": holder}
        if lease_ms is not None:
            args["lease_ms"] = lease_ms
        return self._invoke("reserve_group", args)["key"].value

    def break_reservation(self, taxon: str, admin: str, reason: str) -> None:
        self._invoke("break", {"taxon": taxon, "admin": admin, "reason": reason})

    def list_entries(self) -> list[dict]:
        return json.loads(self._invoke("list", {})["entries"].value)

"""Store-shaped client speaking to a persistence broker over the bus.

Anything accepting a Store also accepts a BrokerClient: put/put_many/get/
load_class/snapshot/export_xml/import_xml have identical shapes.
"""

from __future__ import annotations

import json

from ..errors import RemoteError, typed_error
from ..values import attrs_from_json, attrs_to_json, canonical_json
from .broker import service_name
from .store import PersistentRecord


class BrokerClient:
    def __init__(self, node, partition: str = "main", timeout_ms: int = 5000):
        self.node = node
        self.service = service_name(partition)
        self.timeout_ms = timeout_ms

    def _invoke(self, op, args):
        try:
            return self.node.invoke(self.service, op, args, timeout_ms=self.timeout_ms)
        except RemoteError as e:
            raise typed_error(e.code, e.detail) from None

    def put(self, cls, rid, payload, expected_version=None):
        args = {"class": cls, "id": rid,
                "payload": canonical_json(attrs_to_json(payload))}
        if expected_version is not None:
            args["expected_version"] = expected_version
        return self._invoke("put", args)["version"].value

    def put_many(self, records):
        entries = []
        for rec in records:
            entry = {"class": rec[0], "id": rec[1],
                     "payload": attrs_to_json(rec[2])}
            if len(rec) > 3 and rec[3] is not None:
                entry["expected_version"] = rec[3]
            entries.append(entry)
        out = self._invoke("put_many", {"records": canonical_json(entries)})
        return json.loads(out["versions"].value)

    def get(self, cls, rid):
        out = self._invoke("get", {"class": cls, "id": rid})
        if not out["found"].value:
            return None
        return PersistentRecord(cls, rid, out["version"].value,
                                attrs_from_json(json.loads(out["payload"].value)))

    def load_class(self, cls):
        out = self._invoke("load_class", {"class": cls})
        return [PersistentRecord(cls, r["id"], r["version"], attrs_from_json(r["payload"]))
                for r in json.loads(out["records"].value)]

    def snapshot(self):
        self._invoke("snapshot", {})

    def export_xml(self, classes):
        return self._invoke("export_xml", {"classes": canonical_json(list(classes))})["xml"].value

    def import_xml(self, document):
        return self._invoke("import_xml", {"xml": document})["count"].value

    def ping(self):
        self._invoke("ping", {})

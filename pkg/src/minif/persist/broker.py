"""Bus face of the store: a semi-stateless persistence broker process.

The broker hides the storage mechanism behind bus operations; killing the
process and restarting from the files yields identical query results.
"""

from __future__ import annotations

import json

from ..values import (StatusValue, attrs_from_json, attrs_to_json,
                      canonical_json, sv_int, sv_text)
from ..wirebus.node import OpServant
from .store import Store

SERVICE_PREFIX = "svc.persist."


def service_name(partition: str = "main") -> str:
    return SERVICE_PREFIX + partition


class BrokerServant(OpServant):
    def __init__(self, store: Store):
        self.store = store

    def op_put(self, args, ctx):
        expected = args.get("expected_version")
        version = self.store.put(
            args["class"].value, args["id"].value,
            attrs_from_json(json.loads(args["payload"].value)),
            expected.value if expected is not None else None)
        return {"version": sv_int(version)}

    def op_put_many(self, args, ctx):
        batch = []
        for entry in json.loads(args["records"].value):
            batch.append((entry["class"], entry["id"],
                          attrs_from_json(entry["payload"]),
                          entry.get("expected_version")))
        versions = self.store.put_many(batch)
        return {"versions": sv_text(canonical_json(versions))}

    def op_get(self, args, ctx):
        rec = self.store.get(args["class"].value, args["id"].value)
        if rec is None:
            return {"found": StatusValue("bool", False)}
        return {"found": StatusValue("bool", True),
                "version": sv_int(rec.version),
                "payload": sv_text(canonical_json(attrs_to_json(rec.payload)))}

    def op_load_class(self, args, ctx):
        records = [{"id": r.id, "version": r.version,
                    "payload": attrs_to_json(r.payload)}
                   for r in self.store.load_class(args["class"].value)]
        return {"records": sv_text(canonical_json(records))}

    def op_snapshot(self, args, ctx):
        self.store.snapshot()
        return {"records": sv_int(self.store.count())}

    def op_export_xml(self, args, ctx):
        classes = json.loads(args["classes"].value)
        return {"xml": sv_text(self.store.export_xml(classes))}

    def op_import_xml(self, args, ctx):
        return {"count": sv_int(self.store.import_xml(args["xml"].value))}

    def op_ping(self, args, ctx):
        return {}

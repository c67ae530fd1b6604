"""Device records and process manifests, as stored by the persistence layer.

A device record's init attributes carry an `init.` prefix in the persisted
payload and its last saved state a `state.` prefix, so one flat attribute
map round-trips both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import MinifError
from ..values import StatusValue, canonical_json, sv_enum, sv_text
from .taxon import parse_taxon


class UnknownProcess(MinifError):
    pass


class BrokerUnavailable(MinifError):
    pass


@dataclass
class DeviceRecord:
    name: str                               # rendered taxon
    kind: str
    process_id: str
    init_attrs: dict[str, StatusValue] = field(default_factory=dict)
    persisted_state: dict[str, StatusValue] = field(default_factory=dict)

    def __post_init__(self):
        parse_taxon(self.name)

    def to_payload(self) -> dict[str, StatusValue]:
        payload = {"kind": sv_enum(self.kind), "process_id": sv_text(self.process_id)}
        for k, v in self.init_attrs.items():
            payload["init." + k] = v
        for k, v in self.persisted_state.items():
            payload["state." + k] = v
        return payload

    @classmethod
    def from_payload(cls, name: str, payload: dict[str, StatusValue]) -> "DeviceRecord":
        init, state = {}, {}
        for k, v in payload.items():
            if k.startswith("init."):
                init[k[5:]] = v
            elif k.startswith("state."):
                state[k[6:]] = v
        return cls(name=name, kind=payload["kind"].value,
                   process_id=payload["process_id"].value,
                   init_attrs=init, persisted_state=state)


@dataclass
class ProcessManifest:
    process_id: str
    fep_type: str
    device_records: list[str] = field(default_factory=list)
    endpoint: str = "auto"

    def to_payload(self) -> dict[str, StatusValue]:
        return {"fep_type": sv_text(self.fep_type),
                "endpoint": sv_text(self.endpoint),
                "device_records": sv_text(canonical_json(self.device_records))}

    @classmethod
    def from_payload(cls, process_id: str, payload: dict[str, StatusValue]) -> "ProcessManifest":
        return cls(process_id=process_id,
                   fep_type=payload["fep_type"].value,
                   endpoint=payload["endpoint"].value,
                   device_records=json.loads(payload["device_records"].value))


def store_device_record(store, record: DeviceRecord) -> int:
    return store.put("devrec", record.name, record.to_payload())


def store_manifest(store, manifest: ProcessManifest) -> int:
    return store.put("manifest", manifest.process_id, manifest.to_payload())


def load_process_config(store, process_id: str) -> tuple[ProcessManifest, list[DeviceRecord]]:
    """Pure read of one process's manifest plus its device records."""
    rec = store.get("manifest", process_id)
    if rec is None:
        raise UnknownProcess(process_id)
    manifest = ProcessManifest.from_payload(process_id, rec.payload)
    records = []
    for dev in store.load_class("devrec"):
        if dev.payload.get("process_id") and dev.payload["process_id"].value == process_id:
            records.append(DeviceRecord.from_payload(dev.id, dev.payload))
    listed = set(manifest.device_records)
    records = [r for r in records if r.name in listed] if listed else records
    for r in records:
        if r.process_id != process_id:
            raise UnknownProcess(f"record {r.name} belongs to {r.process_id}")
    return manifest, records

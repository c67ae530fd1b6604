"""Deterministic desk-scale facility fixtures.

Default shape: 8 beamlines x 225 devices = 1,800 control points spread
over 6 FEPs (two each of motion, power, diagnostics). Everything derives
from the seed, so two runs with the same arguments produce identical
stores.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..values import sv_bool, sv_int, sv_real
from .records import DeviceRecord, ProcessManifest, store_device_record, store_manifest

FEP_TYPES = ("motion", "power", "diagnostics")

# device kind -> (beam subsystem segment, device prefix, owning fep type)
KIND_LAYOUT = {
    "motor": ("align", "m", "motion"),
    "supply": ("power", "ps", "power"),
    "sensor": ("diag", "sn", "diagnostics"),
    "digitizer": ("diag", "dg", "diagnostics"),
}


@dataclass
class FixtureSpec:
    beams: int = 8
    feps_per_beam: float = 0.75
    seed: int = 1
    root: str = "nif"
    counts: dict = field(default_factory=lambda: {
        "motor": 100, "supply": 75, "sensor": 30, "digitizer": 20})

    @property
    def fep_count(self) -> int:
        return max(1, round(self.beams * self.feps_per_beam))

    def devices_per_beam(self) -> int:
        return sum(self.counts.values())


def _fep_ids(spec: FixtureSpec) -> list[tuple[str, str]]:
    """[(process_id, fep_type)] with types assigned round-robin."""
    out = []
    per_type: dict[str, int] = {}
    for i in range(spec.fep_count):
        fep_type = FEP_TYPES[i % len(FEP_TYPES)]
        per_type[fep_type] = per_type.get(fep_type, 0) + 1
        out.append((f"fep-{fep_type}-{per_type[fep_type]:02d}", fep_type))
    return out


def _init_attrs(kind: str, rng: random.Random) -> dict:
    if kind == "motor":
        limit_max = rng.uniform(50.0, 200.0)
        return {
            "velocity": sv_real(round(rng.uniform(2.0, 8.0), 3)),
            "limit_min": sv_real(0.0),
            "limit_max": sv_real(round(limit_max, 3)),
            "deadband": sv_real(0.05),
            "position": sv_real(round(rng.uniform(0.0, limit_max / 4), 3)),
        }
    if kind == "supply":
        return {
            "limit_v": sv_real(round(rng.uniform(100.0, 500.0), 1)),
            "ramp_rate": sv_real(round(rng.uniform(20.0, 80.0), 1)),
            "deadband": sv_real(0.5),
            "setpoint_v": sv_real(0.0),
            "enabled": sv_bool(False),
        }
    if kind == "sensor":
        return {
            "base": sv_real(round(rng.uniform(10.0, 90.0), 3)),
            "amp": sv_real(round(rng.uniform(1.0, 5.0), 3)),
            "period_s": sv_real(round(rng.uniform(30.0, 120.0), 1)),
            "noise": sv_real(0.02),
            "deadband": sv_real(0.1),
            "seed": sv_int(rng.randrange(2 ** 31)),
        }
    if kind == "digitizer":
        return {"seed": sv_int(rng.randrange(2 ** 31))}
    raise ValueError(kind)


def generate_fixture(spec: FixtureSpec) -> tuple[list[ProcessManifest], list[DeviceRecord]]:
    rng = random.Random(spec.seed)
    feps = _fep_ids(spec)
    by_type: dict[str, list[str]] = {}
    for pid, fep_type in feps:
        by_type.setdefault(fep_type, []).append(pid)
    manifests = {pid: ProcessManifest(process_id=pid, fep_type=fep_type)
                 for pid, fep_type in feps}
    records = []
    for beam in range(1, spec.beams + 1):
        beam_seg = f"b{beam:03d}"
        for kind in ("motor", "supply", "sensor", "digitizer"):
            subsystem, prefix, fep_type = KIND_LAYOUT[kind]
            owners = by_type.get(fep_type) or [pid for pid, _ in feps]
            owner = owners[(beam - 1) % len(owners)]
            for i in range(1, spec.counts[kind] + 1):
                name = f"{spec.root}.{beam_seg}.{subsystem}.{prefix}{i:03d}"
                rec = DeviceRecord(name=name, kind=kind, process_id=owner,
                                   init_attrs=_init_attrs(kind, rng))
                records.append(rec)
                manifests[owner].device_records.append(name)
    return list(manifests.values()), records


def write_fixture(store, spec: FixtureSpec) -> tuple[int, int]:
    """Write manifests + device records into a persist store; returns
    (manifest count, record count)."""
    manifests, records = generate_fixture(spec)
    store.put_many([("manifest", m.process_id, m.to_payload()) for m in manifests])
    batch = [("devrec", r.name, r.to_payload()) for r in records]
    for i in range(0, len(batch), 500):
        store.put_many(batch[i:i + 500])
    return len(manifests), len(records)

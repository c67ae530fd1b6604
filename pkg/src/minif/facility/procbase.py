"""Shared runtime for facility processes: config, heartbeats, logging."""

from __future__ import annotations

import json
import logging
import os
import signal
import threading
import time
from pathlib import Path

import psutil

from ..logsvc import LogClient
from ..sysmgr.service import SERVICE_NAME as SYSMGR, HEARTBEAT_INTERVAL_MS
from ..wirebus import BusNode
from ..wirebus.node import OpServant
from ..values import sv_text, canonical_json

log = logging.getLogger(__name__)


class FacilityConfig:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        raw = json.loads(self.path.read_text())
        base = self.path.parent
        self.data_dir = (base / raw.get("data_dir", ".")).resolve()
        ns = raw.get("ns", {})
        self.ns = (ns.get("host", "127.0.0.1"), int(ns.get("port", 4720)))
        self.http_port = int(raw.get("http_port", 4780))
        self.heartbeat_ms = int(raw.get("heartbeat_ms", HEARTBEAT_INTERVAL_MS))
        self.sim_tick_hz = float(raw.get("sim_tick_hz", 20.0))
        self.persist_partition = raw.get("persist_partition", "main")
        self.panels = raw.get("panels", ["alignment", "power", "diagnostics"])
        self.sampler_prefix = raw.get("sampler_prefix", "nif.b001.diag")
        self.sampler_period_ms = int(raw.get("sampler_period_ms", 10_000))
        self.processes = raw.get("processes", [])
        self.raw = raw

    def process_entries(self) -> list[dict]:
        return list(self.processes)

    def spawn_command(self, entry: dict) -> str:
        import sys
        kind = entry["kind"]
        cmd = f"{sys.executable} -m minif {kind} --config {self.path}"
        if kind in ("fep", "persist"):
            cmd += f" --process-id {entry['process_id']}"
        return cmd


def default_config_dict(ns_port: int = 4720, http_port: int = 4780,
                        fep_ids: list[str] | None = None) -> dict:
    processes = [
        {"process_id": "ns", "kind": "ns", "restart_policy": "never"},
        {"process_id": "persist-main", "kind": "persist", "restart_policy": "never"},
        {"process_id": "sysmgr", "kind": "sysmgr", "restart_policy": "never"},
        {"process_id": "supervisor", "kind": "supervisor", "restart_policy": "never"},
    ]
    for pid in fep_ids or []:
        processes.append({"process_id": pid, "kind": "fep",
                          "restart_policy": "respawn", "max_attempts": 3,
                          "backoff_ms": 500})
    return {"data_dir": ".", "ns": {"host": "127.0.0.1", "port": ns_port},
            "http_port": http_port, "heartbeat_ms": 1000, "sim_tick_hz": 20,
            "persist_partition": "main",
            "panels": ["alignment", "power", "diagnostics"],
            "processes": processes}


class ProcessApp:
    """A facility process: a bus node plus heartbeat and log plumbing."""

    def __init__(self, process_id: str, config: FacilityConfig):
        self.process_id = process_id
        self.config = config
        self.node = BusNode(process_id, ns=config.ns)
        self.logc = LogClient(self.node, process_id)
        self._stop = threading.Event()
        self._hb_seq = 0
        self._threads: list[threading.Thread] = []

    def start_heartbeats(self):
        proc = psutil.Process()

        def loop():
            while not self._stop.wait(self.config.heartbeat_ms / 1000.0):
                self._hb_seq += 1
                stats = {"cpu": proc.cpu_percent(interval=None),
                         "mem_mb": round(proc.memory_info().rss / 1e6, 1),
                         "queues": threading.active_count(),
                         "pid": os.getpid()}
                try:
                    self.node.send_oneway(SYSMGR, "heartbeat",
                                          {"process_id": self.process_id,
                                           "seq": self._hb_seq,
                                           "stats": canonical_json(stats)},
                                          kind="hb")
                except Exception:  # noqa: BLE001 - sysmgr may not be up yet
                    pass

        self._spawn(loop, "heartbeat")

    def _spawn(self, fn, name):
        t = threading.Thread(target=fn, name=f"{self.process_id}-{name}", daemon=True)
        t.start()
        self._threads.append(t)
        return t

    def retry(self, fn, what: str, deadline_s: float = 30.0, interval_s: float = 0.25):
        """Keep trying a start-up step until it works or the deadline passes."""
        deadline = time.monotonic() + deadline_s
        last = None
        while time.monotonic() < deadline:
            try:
                return fn()
            except Exception as e:  # noqa: BLE001
                last = e
                if self._stop.wait(interval_s):
                    raise
        raise RuntimeError(f"{self.process_id}: {what} never came up: {last}")

    def install_signals(self):
        def handler(signum, frame):
            log.info("%s: signal %s, shutting down", self.process_id, signum)
            self.shutdown()
            os._exit(0)

        signal.signal(signal.SIGTERM, handler)
        signal.signal(signal.SIGINT, handler)

    def run_forever(self):
        self.install_signals()
        while not self._stop.wait(3600):
            pass

    def shutdown(self):
        self._stop.set()
        try:
            self.logc.close()
        except Exception:  # noqa: BLE001
            pass
        self.node.close()


class ProcServant(OpServant):
    """Per-process control surface registered as proc.<process_id>."""

    def __init__(self, app, monitor=None, manifest=None):
        self.app = app
        self.monitor = monitor
        self.manifest = manifest

    def op_ping(self, args, ctx):
        return {"process_id": sv_text(self.app.process_id)}

    def op_snapshot(self, args, ctx):
        if self.monitor is None:
            return {"updates": sv_text("{}")}
        prefix = args.get("prefix")
        snap = self.monitor.snapshot(prefix.value if prefix else "")
        payload = {ch: {"value": u.value.to_json(), "seq": u.seq, "ts": u.ts,
                        "reason": u.reason} for ch, u in snap.items()}
        return {"updates": sv_text(canonical_json(payload))}

    def op_manifest(self, args, ctx):
        if self.manifest is None:
            return {"manifest": sv_text("{}")}
        return {"manifest": sv_text(canonical_json(
            {"process_id": self.manifest.process_id,
             "fep_type": self.manifest.fep_type,
             "device_records": self.manifest.device_records}))}

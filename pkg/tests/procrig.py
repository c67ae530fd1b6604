"""Facility rigs for integration tests.

ThreadFacility composes hub + broker + sysmgr + supervisor + FEPs inside
the test process (fast, no subprocesses). ProcFacility spawns the real
executables so tests can SIGKILL things.
"""

from __future__ import annotations

import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

from minif.config import FixtureSpec, write_fixture
from minif.facility.fep import FepApp
from minif.facility.procbase import FacilityConfig, default_config_dict
from minif.facility.services import run_ns  # noqa: F401 (documentation pointer)
from minif.facility.supervisor import SupervisorApp
from minif.persist import BrokerServant, Store
from minif.persist.broker import service_name
from minif.sysmgr import SysmgrServant, SystemManager
from minif.wirebus import BusNode, Hub


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def make_fixture(tmp_path: Path, beams=1, devices_per_beam=12, seed=5,
                 feps_per_beam=2.0, ns_port=None, http_port=None) -> FacilityConfig:
    spec = FixtureSpec(beams=beams, feps_per_beam=feps_per_beam, seed=seed)
    scale = devices_per_beam / sum(spec.counts.values())
    spec.counts = {k: max(1, round(v * scale)) for k, v in spec.counts.items()}
    store = Store(tmp_path)
    write_fixture(store, spec)
    store.close()
    raw = default_config_dict(ns_port=ns_port or free_port(),
                              http_port=http_port or free_port(),
                              fep_ids=sorted({r.process_id for r in
                                              _manifests(tmp_path)}))
    (tmp_path / "facility.json").write_text(json.dumps(raw, indent=2))
    return FacilityConfig(tmp_path / "facility.json")


def _manifests(tmp_path):
    store = Store(tmp_path)
    try:
        from minif.config.records import ProcessManifest
        return [ProcessManifest.from_payload(r.id, r.payload)
                for r in store.load_class("manifest")]
    finally:
        store.close()


class ThreadFacility:
    def __init__(self, tmp_path: Path, beams=1, devices_per_beam=12,
                 with_gateway=False, start_feps=True, sysmgr_timer=False):
        self.config = make_fixture(tmp_path, beams, devices_per_beam)
        self.hub = Hub(*self.config.ns)
        self.store = Store(self.config.data_dir)
        self.broker_node = BusNode("persist-main", ns=self.config.ns)
        self.broker_node.register_object(service_name("main"), BrokerServant(self.store))
        self.sysmgr_node = BusNode("sysmgr", ns=self.config.ns)
        self.sysmgr = SystemManager(publish=self.sysmgr_node.publish)
        if sysmgr_timer:
            self.sysmgr.start_timer()
        self.sysmgr_node.register_object("svc.sysmgr", SysmgrServant(self.sysmgr))
        self.supervisor = SupervisorApp(self.config, with_gateway=with_gateway).start()
        self.feps: dict[str, FepApp] = {}
        if start_feps:
            for m in _manifests(self.config.data_dir):
                self.feps[m.process_id] = FepApp(m.process_id, self.config).start()
        self.client = BusNode("testclient", ns=self.config.ns)

    def wait_participants(self, timeout_s=10.0):
        deadline = time.monotonic() + timeout_s
        want = set(self.feps)
        while time.monotonic() < deadline:
            if want <= set(self.supervisor.coordinator.participants):
                return True
            time.sleep(0.05)
        raise TimeoutError(f"participants: {self.supervisor.coordinator.participants}")

    def close(self):
        self.client.close()
        for fep in self.feps.values():
            fep.shutdown()
        self.supervisor.shutdown()
        self.sysmgr.stop()
        self.sysmgr_node.close()
        self.broker_node.close()
        self.store.close()
        self.hub.close()


class ProcFacility:
    """Real processes; logs go to <tmp>/logs/<pid>.log."""

    KINDS = (("ns", "ns"), ("persist", "persist-main"), ("sysmgr", "sysmgr"),
             ("supervisor", "supervisor"))

    def __init__(self, tmp_path: Path, beams=2, devices_per_beam=30,
                 gateway=False, feps_per_beam=2.0, seed=5):
        self.tmp = Path(tmp_path)
        self.config = make_fixture(self.tmp, beams, devices_per_beam,
                                   feps_per_beam=feps_per_beam, seed=seed)
        self.gateway = gateway
        self.logdir = self.tmp / "logs"
        self.logdir.mkdir(exist_ok=True)
        self.children: dict[str, subprocess.Popen] = {}
        self.client: BusNode | None = None

    def fep_ids(self) -> list[str]:
        return [e["process_id"] for e in self.config.processes if e["kind"] == "fep"]

    def spawn(self, kind: str, process_id: str | None = None, extra=()):
        pid = process_id or kind
        cmd = [sys.executable, "-m", "minif", kind, "--config", str(self.config.path),
               *extra]
        if kind in ("fep", "persist"):
            cmd += ["--process-id", pid]
        logf = open(self.logdir / f"{pid}.log", "a")
        self.children[pid] = subprocess.Popen(cmd, stdout=logf, stderr=subprocess.STDOUT,
                                              start_new_session=True)
        return self.children[pid]

    def start_core(self):
        self.spawn("ns")
        self._await(lambda: self.bus().invoke("proc.ns", "ping", timeout_ms=400),
                    "name service")
        self.spawn("persist", "persist-main")
        self._await(lambda: self.bus().invoke("proc.persist-main", "ping",
                                              timeout_ms=400), "persist broker")
        self.spawn("sysmgr")
        self._await(lambda: self.bus().invoke("svc.sysmgr", "report",
                                              timeout_ms=400), "sysmgr")
        self.register_all()
        extra = () if self.gateway else ("--no-gateway",)
        self.spawn("supervisor", extra=extra)
        self._await(lambda: self.bus().invoke("proc.supervisor", "ping",
                                              timeout_ms=400), "supervisor")
        return self

    def start_feps(self):
        for pid in self.fep_ids():
            self.spawn("fep", pid)
        return self

    def register_all(self):
        from minif.values import canonical_json
        node = self.bus()
        for entry in self.config.processes:
            record = {"process_id": entry["process_id"],
                      "spawn_command": self.config.spawn_command(entry),
                      "restart_policy": entry.get("restart_policy", "never"),
                      "max_attempts": entry.get("max_attempts", 0),
                      "backoff_ms": entry.get("backoff_ms", 500)}
            node.invoke("svc.sysmgr", "register_process",
                        {"record": canonical_json(record)}, timeout_ms=2000)

    def bus(self) -> BusNode:
        if self.client is None or self.client._closed:
            self.client = BusNode("testrig", ns=self.config.ns)
        return self.client

    def _await(self, probe, what: str, timeout_s: float = 20.0):
        from minif.errors import MinifError
        deadline = time.monotonic() + timeout_s
        last = None
        while time.monotonic() < deadline:
            try:
                probe()
                return
            except MinifError as e:
                last = e
                time.sleep(0.15)
        raise TimeoutError(f"{what} not up after {timeout_s}s: {last}")

    def wait_state(self, process_id: str, state: str, timeout_s: float = 15.0) -> bool:
        deadline = time.monotonic() + timeout_s
        node = self.bus()
        from minif.errors import MinifError
        while time.monotonic() < deadline:
            try:
                out = node.invoke("svc.sysmgr", "state", {"process_id": process_id},
                                  timeout_ms=500)
                if out["state"].value == state:
                    return True
            except MinifError:
                pass
            time.sleep(0.1)
        return False

    def kill(self, process_id: str):
        child = self.children.get(process_id)
        if child is not None and child.poll() is None:
            child.send_signal(signal.SIGKILL)
            child.wait(5)

    def close(self):
        if self.client is not None:
            self.client.close()
        # reap sysmgr-respawned children too
        pids = set()
        node = None
        try:
            node = BusNode("reaper", ns=self.config.ns)
            report = node.invoke("svc.sysmgr", "report", timeout_ms=500)
            pids = {p["pid"] for p in json.loads(report["processes"].value)
                    if p.get("pid")}
        except Exception:  # noqa: BLE001
            pass
        finally:
            if node is not None:
                node.close()
        for child in self.children.values():
            if child.poll() is None:
                child.terminate()
        for child in self.children.values():
            try:
                child.wait(5)
            except subprocess.TimeoutExpired:
                child.kill()
        import os
        for pid in pids:
            try:
                os.kill(pid, signal.SIGTERM)
            except (ProcessLookupError, PermissionError):
                pass

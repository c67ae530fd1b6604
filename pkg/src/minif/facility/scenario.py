"""Scenario runner: reproducible multi-process integration runs.

A script is a JSON object {"directives": [...]}; each directive is a dict
whose single verb key names the action. The runner spawns the facility,
registers every process with the system manager (so failover works on
processes it did not itself start), drives the steps, and reports each
expect as PASS/FAIL. Exit code 0 iff every expect passed.
"""

from __future__ import annotations

import json
import logging
import signal
import subprocess
import sys
import time
from pathlib import Path

from ..errors import MinifError
from ..reserve import ReserveClient
from ..shotseq.coordinator import SERVICE_NAME as SHOT_SVC
from ..statmon import StatusMirror
from ..sysmgr.service import SERVICE_NAME as SYSMGR
from ..values import canonical_json
from ..wirebus import BusNode
from .procbase import FacilityConfig

log = logging.getLogger(__name__)

SPAWN_ORDER = ("ns", "persist", "sysmgr", "supervisor", "fep")


class ScriptError(MinifError):
    pass


class ScenarioRunner:
    def __init__(self, config: FacilityConfig, script: dict,
                 base_dir: Path | None = None):
        self.config = config
        self.script = script
        self.base_dir = base_dir or config.path.parent
        self.children: dict[str, subprocess.Popen] = {}
        self.node: BusNode | None = None
        self.mirror: StatusMirror | None = None
        self.keys: dict[str, str] = {}
        self.report: list[dict] = []
        self.last_shot_id: int | None = None
        self.executions: list[str] = []

    # -- helpers ------------------------------------------------------------

    def _entry(self, process_id: str) -> dict:
        for entry in self.config.process_entries():
            if entry["process_id"] == process_id:
                return entry
        raise ScriptError(f"process {process_id!r} not in facility config")

    def _client(self) -> BusNode:
        if self.node is None:
            self.node = BusNode("scenario", ns=self.config.ns)
        return self.node

    def spawn(self, process_id: str):
        entry = self._entry(process_id)
        cmd = self.config.spawn_command(entry)
        log.info("spawn %s: %s", process_id, cmd)
        proc = subprocess.Popen(cmd.split(), cwd=self.base_dir,
                                start_new_session=True)
        self.children[process_id] = proc
        return proc

    def spawn_all(self):
        ordered = sorted(self.config.process_entries(),
                         key=lambda e: SPAWN_ORDER.index(e["kind"]))
        for entry in ordered:
            self.spawn(entry["process_id"])
            if entry["kind"] in ("ns", "persist", "sysmgr"):
                self._await_kind_up(entry)
            if entry["kind"] == "sysmgr":
                self.register_processes()

    def _await_kind_up(self, entry, timeout_s: float = 15.0):
        node = None
        deadline = time.monotonic() + timeout_s
        target = {"ns": "proc.ns", "persist": f"proc.{entry['process_id']}",
                  "sysmgr": "svc.sysmgr"}.get(entry["kind"])
        while time.monotonic() < deadline:
            try:
                node = self._client()
                node.invoke(target, "ping" if target.startswith("proc.") else "report",
                            timeout_ms=500)
                return
            except MinifError:
                time.sleep(0.2)
        raise ScriptError(f"{entry['process_id']} did not come up in {timeout_s}s")

    def register_processes(self):
        node = self._client()
        for entry in self.config.process_entries():
            record = {"process_id": entry["process_id"],
                      "spawn_command": self.config.spawn_command(entry),
                      "restart_policy": entry.get("restart_policy", "never"),
                      "max_attempts": entry.get("max_attempts", 0),
                      "backoff_ms": entry.get("backoff_ms", 500)}
            try:
                node.invoke(SYSMGR, "register_process",
                            {"record": canonical_json(record)}, timeout_ms=2000)
            except MinifError as e:
                log.warning("register_process %s: %s", entry["process_id"], e)

    # -- directives --------------------------------------------------------------

    def run(self) -> int:
        directives = self.script.get("directives")
        if not isinstance(directives, list):
            raise ScriptError("script needs a 'directives' list")
        failed = 0
        try:
            for i, directive in enumerate(directives):
                verb, arg = self._parse(directive)
                t0 = time.monotonic()
                try:
                    outcome = getattr(self, "do_" + verb)(arg)
                    ok = outcome is not False
                except ScriptError:
                    raise
                except Exception as e:  # noqa: BLE001
                    ok, outcome = False, repr(e)
                elapsed = round((time.monotonic() - t0) * 1000)
                entry = {"step": i, "directive": verb, "arg": arg,
                         "ok": ok, "elapsed_ms": elapsed, "detail": outcome}
                self.report.append(entry)
                marker = "PASS" if ok else "FAIL"
                print(f"{marker} [{elapsed:6d} ms] {verb} {json.dumps(arg)}",
                      flush=True)
                if not ok:
                    failed += 1
        finally:
            self.do_stop_all({})
        return 0 if failed == 0 else 1

    @staticmethod
    def _parse(directive: dict) -> tuple[str, dict]:
        if not isinstance(directive, dict) or len(directive) != 1:
            raise ScriptError(f"directive must have one verb: {directive!r}")
        verb, arg = next(iter(directive.items()))
        if not isinstance(arg, dict):
            raise ScriptError(f"directive argument must be an object: {directive!r}")
        return verb.replace("-", "_"), arg

    def do_spawn(self, arg):
        if arg.get("process") == "all":
            self.spawn_all()
        else:
            self.spawn(arg["process"])
        return True

    def do_wait_up(self, arg):
        process = arg["process"]
        timeout = arg.get("timeout_ms", 15_000) / 1000.0
        node = self._client()
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                out = node.invoke(SYSMGR, "state", {"process_id": process},
                                  timeout_ms=500)
                if out["state"].value == "up":
                    return True
            except MinifError:
                pass
            time.sleep(0.2)
        return False

    def do_sleep(self, arg):
        time.sleep(arg.get("ms", 1000) / 1000.0)
        return True

    def do_reserve(self, arg):
        client = ReserveClient(self._client())
        taxons = arg.get("taxons")
        if not taxons and "prefix" in arg:
            taxons = [n for n in self._client().list_names(arg["prefix"])
                      if not n.startswith(("svc.", "proc."))]
        if not taxons:
            raise ScriptError("reserve needs taxons or prefix")
        key = client.reserve_group(taxons, arg.get("holder", "scenario"))
        for t in taxons:
            self.keys[t] = key
        return {"key": key, "count": len(taxons)}

    def do_release(self, arg):
        released = 0
        for key in set(self.keys.values()):
            try:
                ReserveClient(self._client()).release(key)
                released += 1
            except MinifError:
                pass
        self.keys.clear()
        return {"released_keys": released}

    def do_operator_script(self, arg):
        from ..alerts import AlertClient, ScriptedOperator
        client = AlertClient(self._client())
        operator = ScriptedOperator(script=arg.get("responses", []),
                                    operator=arg.get("operator", "scenario-operator"))
        operator._client = client
        operator.service = None
        operator.attach_bus(self._client(), client)
        return True

    def do_run_sequence(self, arg):
        xml = (self.base_dir / arg["file"]).read_text() if "file" in arg \
            else arg["xml"]
        args = {"xml": xml, "operator": arg.get("operator", "scenario")}
        if "operator_script" in arg:
            args["operator_script"] = canonical_json(arg["operator_script"])
        out = self._client().invoke("svc.seq", "run", args, timeout_ms=10_000)
        exec_id = out["exec_id"].value
        self.executions.append(exec_id)
        deadline = time.monotonic() + arg.get("timeout_ms", 120_000) / 1000.0
        while time.monotonic() < deadline:
            status = json.loads(self._client().invoke(
                "svc.seq", "status", {"exec_id": exec_id},
                timeout_ms=5000)["status"].value)
            if not status["running"]:
                outcome = status.get("outcome", {})
                return outcome if outcome.get("outcome") == "ok" else False
            time.sleep(0.25)
        return False

    def do_start_shot(self, arg):
        node = self._client()
        plan = {"participants": arg.get("participants", []),
                "parameters": arg.get("parameters", {}),
                "timeout_per_phase_ms": arg.get("timeout_per_phase_ms", 5000)}
        if not plan["participants"]:
            plan["participants"] = self._fep_ids()
        out = node.invoke(SHOT_SVC, "run",
                          {"plan": canonical_json(plan),
                           "dwell_ms": arg.get("dwell_ms", 0)}, timeout_ms=10_000)
        self.last_shot_id = out["shot_id"].value
        return {"shot_id": self.last_shot_id}

    def _fep_ids(self):
        return [e["process_id"] for e in self.config.process_entries()
                if e["kind"] == "fep"]

    def do_abort_shot(self, arg):
        shot_id = arg.get("shot_id", self.last_shot_id)
        out = self._client().invoke(SHOT_SVC, "abort",
                                    {"reason": arg.get("reason", "scenario abort")},
                                    timeout_ms=10_000)
        return json.loads(out["step"].value)

    def do_kill(self, arg):
        process = arg["process"]
        child = self.children.get(process)
        if child is not None and child.poll() is None:
            child.send_signal(signal.SIGKILL)
            child.wait(5)
            return True
        self._client().invoke(SYSMGR, "kill", {"process_id": process},
                              timeout_ms=2000)
        return True

    def do_expect(self, arg):
        check = arg["check"]
        timeout = arg.get("timeout_ms", 10_000) / 1000.0
        deadline = time.monotonic() + timeout
        last = None
        while True:
            ok, last = self._check(check, arg)
            if ok:
                return {"check": check, "value": last}
            if time.monotonic() >= deadline:
                return False
            time.sleep(0.15)

    def _check(self, check: str, arg: dict):
        node = self._client()
        try:
            if check == "process_state":
                out = node.invoke(SYSMGR, "state",
                                  {"process_id": arg["process"]}, timeout_ms=500)
                state = out["state"].value
                return state == arg["state"], state
            if check == "resolve_ok":
                ref = node.resolve(arg["name"])
                return True, ref.incarnation
            if check == "invoke_ok":
                node.invoke(arg["target"], arg.get("op", "read_status"),
                            key=self.keys.get(arg["target"]), timeout_ms=1000)
                return True, "ok"
            if check == "incarnation_gt":
                node._cache.pop(arg["name"], None)
                ref = node.resolve(arg["name"])
                return ref.incarnation > arg["than"], ref.incarnation
            if check == "status_cmp":
                if self.mirror is None:
                    self.mirror = StatusMirror(node)
                update = self.mirror.get(arg["channel"])
                if update is None:
                    return False, None
                from ..values import unwrap
                value = unwrap(update.value)
                cmp = arg.get("cmp", "eq")
                want = arg["value"]
                ok = {"eq": value == want, "ge": value >= want,
                      "le": value <= want}[cmp]
                return ok, value
            if check == "shot_outcome":
                shot_id = arg.get("shot_id", self.last_shot_id)
                record = json.loads(node.invoke(SHOT_SVC, "get",
                                                {"shot_id": shot_id},
                                                timeout_ms=2000)["record"].value)
                outcome = record.get("outcome")
                if outcome is None:
                    return False, None
                return outcome["outcome"] == arg["outcome"], outcome
            if check == "name_count":
                names = [n for n in node.list_names(arg.get("prefix", ""))]
                return len(names) >= arg["at_least"], len(names)
        except MinifError as e:
            return False, f"{type(e).__name__}: {e.detail}"
        raise ScriptError(f"unknown check {check!r}")

    def do_stop_all(self, arg):
        for process_id, child in list(self.children.items()):
            if child.poll() is None:
                child.terminate()
        deadline = time.monotonic() + 5
        for child in self.children.values():
            remaining = max(0.1, deadline - time.monotonic())
            try:
                child.wait(remaining)
            except subprocess.TimeoutExpired:
                child.kill()
        if self.mirror is not None:
            self.mirror.close()
            self.mirror = None
        if self.node is not None:
            self.node.close()
            self.node = None
        return True


def main(args, config: FacilityConfig):
    logging.basicConfig(level=logging.INFO)
    script = json.loads(Path(args.script).read_text())
    runner = ScenarioRunner(config, script, base_dir=Path(args.script).parent)
    code = runner.run()
    passed = sum(1 for r in runner.report if r["ok"])
    print(f"{passed}/{len(runner.report)} steps passed")
    if getattr(args, "report", None):
        Path(args.report).write_text(json.dumps(runner.report, indent=2))
    sys.exit(code)

"""Command-line entry points: `minif`, `minif-fixture`, `minif-seq`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _config(args):
    from .procbase import FacilityConfig
    path = getattr(args, "config", None)
    if path:
        return FacilityConfig(path)
    # no config file: synthesize one from the environment defaults
    import tempfile
    from .procbase import default_config_dict
    from ..wirebus.hub import ns_endpoint_from_env
    host, port = ns_endpoint_from_env()
    raw = default_config_dict(ns_port=port)
    raw["ns"]["host"] = host
    tmp = Path(tempfile.mkdtemp(prefix="minif-")) / "facility.json"
    tmp.write_text(json.dumps(raw, indent=2))
    return FacilityConfig(tmp)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="minif",
                                     description="desk-scale supervisory control facility")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("ns", "sysmgr", "supervisor"):
        p = sub.add_parser(kind)
        p.add_argument("--config")
        if kind == "supervisor":
            p.add_argument("--no-gateway", action="store_true")

    p = sub.add_parser("persist")
    p.add_argument("--config")
    p.add_argument("--process-id")
    p.add_argument("--partition")

    p = sub.add_parser("fep")
    p.add_argument("--config")
    p.add_argument("--process-id", required=True)

    p = sub.add_parser("scenario")
    p.add_argument("script")
    p.add_argument("--config")
    p.add_argument("--report")

    p = sub.add_parser("lint-layers")
    p.add_argument("manifest", nargs="?")
    p.add_argument("--self", action="store_true", dest="self_check",
                   help="derive and lint this source tree's manifest")
    p.add_argument("--write", help="write the derived manifest to a file")

    p = sub.add_parser("fixture")
    _fixture_args(p)

    args = parser.parse_args(argv)

    if args.command == "lint-layers":
        return _lint_layers(args)
    if args.command == "fixture":
        return _fixture(args)

    config = _config(args)
    if args.command == "ns":
        from .services import run_ns
        run_ns(args, config)
    elif args.command == "persist":
        from .services import run_persist
        run_persist(args, config)
    elif args.command == "sysmgr":
        from .services import run_sysmgr
        run_sysmgr(args, config)
    elif args.command == "supervisor":
        from .supervisor import main as sup_main
        sup_main(args, config)
    elif args.command == "fep":
        from .fep import main as fep_main
        fep_main(args, config)
    elif args.command == "scenario":
        from .scenario import main as scenario_main
        scenario_main(args, config)


def _lint_layers(args):
    from .layers import derive_manifest, lint_layers, load_manifest
    if args.self_check or not args.manifest:
        src = Path(__file__).resolve().parents[2]
        manifest = derive_manifest(src)
    else:
        manifest = load_manifest(args.manifest)
    if args.write:
        Path(args.write).write_text(json.dumps(manifest, indent=2) + "\n")
    violations = lint_layers(manifest)
    for v in violations:
        print(json.dumps(v))
    print(f"{len(manifest['subsystems'])} subsystems, {len(violations)} violations")
    return 0 if not violations else 1


def _fixture_args(p):
    p.add_argument("--beams", type=int, default=8)
    p.add_argument("--feps-per-beam", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--devices-per-beam", type=int, default=None,
                   help="scale the per-beam device counts (default 225)")
    p.add_argument("--ns-port", type=int, default=4720)
    p.add_argument("--http-port", type=int, default=4780)


def _fixture(args):
    from ..config import FixtureSpec, generate_fixture, write_fixture
    from ..persist import Store
    from .procbase import default_config_dict

    spec = FixtureSpec(beams=args.beams, feps_per_beam=args.feps_per_beam,
                       seed=args.seed)
    if args.devices_per_beam:
        scale = args.devices_per_beam / sum(spec.counts.values())
        spec.counts = {k: max(1, round(v * scale)) for k, v in spec.counts.items()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = Store(out)
    n_manifests, n_records = write_fixture(store, spec)
    store.snapshot()
    store.close()
    manifests, _ = generate_fixture(spec)
    raw = default_config_dict(ns_port=args.ns_port, http_port=args.http_port,
                              fep_ids=sorted(m.process_id for m in manifests))
    (out / "facility.json").write_text(json.dumps(raw, indent=2) + "\n")
    print(f"{n_manifests} FEP manifests, {n_records} device records -> {out}")
    return 0


def fixture_main(argv=None):
    p = argparse.ArgumentParser(prog="minif-fixture")
    _fixture_args(p)
    return _fixture(p.parse_args(argv))


def seq_main(argv=None):
    p = argparse.ArgumentParser(prog="minif-seq")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run")
    run.add_argument("file")
    run.add_argument("--operator-script", help="JSON file of scripted responses")
    run.add_argument("--local", action="store_true",
                     help="run against an in-process simulated rig")
    run.add_argument("--trace-out", help="write the canonical trace here")
    args = p.parse_args(argv)

    xml = Path(args.file).read_text()
    script = None
    if args.operator_script:
        script = json.loads(Path(args.operator_script).read_text())

    if args.local:
        from .localrig import LocalRig
        from ..scl import parse_sequence
        rig = LocalRig(operator_script=script)
        try:
            doc = parse_sequence(xml)
            trace = rig.engine().execute(doc, rig.catalog())
            print(trace.canonical() if not args.trace_out else trace.outcome)
            if args.trace_out:
                Path(args.trace_out).write_text(trace.canonical() + "\n")
            return 0 if trace.outcome.get("outcome") == "ok" else 1
        finally:
            rig.close()

    # remote: hand the document to a running supervisor
    from ..values import canonical_json
    from ..wirebus import BusNode
    node = BusNode("minif-seq")
    try:
        req = {"xml": xml, "operator": "minif-seq"}
        if script:
            req["operator_script"] = canonical_json(script)
        exec_id = node.invoke("svc.seq", "run", req, timeout_ms=10_000)["exec_id"].value
        print(f"execution {exec_id}")
        import time
        while True:
            status = json.loads(node.invoke("svc.seq", "status",
                                            {"exec_id": exec_id},
                                            timeout_ms=5000)["status"].value)
            if not status["running"]:
                print(json.dumps(status.get("outcome")))
                if args.trace_out and "trace" in status:
                    Path(args.trace_out).write_text(json.dumps(status["trace"]) + "\n")
                return 0 if status.get("outcome", {}).get("outcome") == "ok" else 1
            time.sleep(0.3)
    finally:
        node.close()


if __name__ == "__main__":
    sys.exit(main())

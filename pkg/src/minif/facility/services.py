"""Small facility executables: name-service hub, persistence broker, sysmgr."""

from __future__ import annotations

import logging
import threading

from ..persist import BrokerServant, Store
from ..persist.broker import service_name
from ..statmon import StatusMonitor
from ..sysmgr import SysmgrServant, SystemManager
from ..values import canonical_json
from ..wirebus import Hub
from .procbase import FacilityConfig, ProcServant, ProcessApp

log = logging.getLogger(__name__)


def run_ns(args, config: FacilityConfig):
    """The hub process; also a bus client of itself so it can heartbeat."""
    logging.basicConfig(level=logging.INFO)
    hub = Hub(config.ns[0], config.ns[1])
    log.info("name service on %s:%d", *hub.endpoint)
    app = ProcessApp("ns", config)
    app.node.register_object("proc.ns", ProcServant(app))
    app.start_heartbeats()
    app.run_forever()


def run_persist(args, config: FacilityConfig):
    logging.basicConfig(level=logging.INFO)
    partition = getattr(args, "partition", None) or config.persist_partition
    process_id = getattr(args, "process_id", None) or f"persist-{partition}"
    app = ProcessApp(process_id, config)
    store = Store(config.data_dir, partition=partition)
    app.node.register_many([
        (service_name(partition), BrokerServant(store)),
        (f"proc.{process_id}", ProcServant(app)),
    ])
    app.start_heartbeats()
    log.info("persistence broker %s serving %d records from %s",
             partition, store.count(), config.data_dir)
    app.run_forever()


def run_sysmgr(args, config: FacilityConfig):
    logging.basicConfig(level=logging.INFO)
    app = ProcessApp("sysmgr", config)
    monitor = StatusMonitor(publish=app.node.publish)

    def ingest_stats(process_id: str, stats: dict):
        for field in ("cpu", "mem_mb", "queues"):
            if field in stats:
                channel = f"sys.{process_id}.{field}"
                if not monitor.has_channel(channel):
                    monitor.register_channel(channel, "real", deadband=1.0)
                monitor.ingest(channel, float(stats[field]))

    def raise_alert(severity: str, source: str, text: str):
        def deliver():
            try:
                app.node.invoke("svc.alert", "raise",
                                {"severity": severity, "source": source,
                                 "text": text,
                                 "options": canonical_json(["acknowledge"])},
                                timeout_ms=2000)
            except Exception:  # noqa: BLE001 - alert service may be the casualty
                log.error("undeliverable alert: %s %s", source, text)

        threading.Thread(target=deliver, daemon=True).start()

    manager = SystemManager(clock=app.node.clock, publish=app.node.publish,
                            raise_alert=raise_alert, ingest_stats=ingest_stats,
                            interval_ms=config.heartbeat_ms)
    manager.start_timer()
    app.node.register_many([
        ("svc.sysmgr", SysmgrServant(manager)),
        ("proc.sysmgr", ProcServant(app, monitor)),
    ])
    app.start_heartbeats()
    log.info("system manager up (interval %d ms)", config.heartbeat_ms)
    app.run_forever()

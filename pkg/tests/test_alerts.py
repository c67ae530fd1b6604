"""Alert life cycle, gating, audit, durability."""

import threading
import time

import pytest

from minif.alerts import (AlertService, AlreadyResponded, BadChoice,
                          ScriptedOperator, UnknownAlert)
from minif.clock import SimClock
from minif.persist import Store


@pytest.fixture
def svc(tmp_path):
    store = Store(tmp_path)
    events = []
    s = AlertService(store=store, clock=SimClock(start_ms=5_000_000),
                     publish=lambda t, p: events.append((t, p)))
    s.test_events = events
    s.test_store = store
    yield s
    store.close()


def test_raise_ids_strictly_increasing(svc):
    ids = [svc.raise_alert("info", "nif.t.x", f"alert {i}") for i in range(5)]
    assert ids == sorted(ids) and len(set(ids)) == 5


def test_wait_blocks_until_respond(svc):
    alert_id = svc.raise_alert("warning", "nif.t.x", "check it",
                               ["retry", "abort"])
    got = {}

    def raiser():
        got["choice"] = svc.wait(alert_id, timeout_s=5)

    t = threading.Thread(target=raiser)
    t.start()
    time.sleep(0.1)
    assert t.is_alive()  # still gated
    svc.respond(alert_id, "retry", "op7")
    t.join(5)
    assert got["choice"] == "retry"


def test_respond_errors(svc):
    alert_id = svc.raise_alert("info", "nif.t.x", "hello", ["ok", "skip"])
    with pytest.raises(BadChoice):
        svc.respond(alert_id, "nope", "op")
    with pytest.raises(UnknownAlert):
        svc.respond(999, "ok", "op")
    svc.respond(alert_id, "ok", "op")
    with pytest.raises(AlreadyResponded):
        svc.respond(alert_id, "skip", "op")


def test_pending_order_and_presented_transition(svc):
    ids = [svc.raise_alert("info", "nif.t.x", f"a{i}") for i in range(3)]
    svc.respond(ids[1], "acknowledge", "op")
    pending = svc.pending()
    assert [a.id for a in pending] == [ids[0], ids[2]]
    assert all(a.state == "presented" for a in pending)
    # a second fetch does not produce another present transaction
    svc.pending()
    txs = svc.history()
    presents = [t for t in txs if t["action"] == "present"]
    assert len(presents) == 2


def test_respond_completes_full_triple(svc):
    alert_id = svc.raise_alert("serious", "nif.t.x", "gate", ["go", "stop"])
    svc.pending()
    svc.respond(alert_id, "go", "op1")
    txs = [t for t in svc.history() if t["alert_id"] == alert_id]
    assert [t["action"] for t in txs] == ["raise", "present", "respond"]
    alert = svc.get(alert_id)
    assert alert.responded_at >= alert.presented_at >= alert.raised_at


def test_history_filters(svc):
    svc.raise_alert("info", "nif.a.x", "one")
    svc.raise_alert("fatal", "nif.b.y", "two")
    assert all(t["severity"] == "fatal" for t in svc.history(severity="fatal"))
    assert all(t["source"].startswith("nif.a") for t in svc.history(source_prefix="nif.a"))


def test_fatal_publishes_extra_topic(svc):
    svc.raise_alert("fatal", "nif.t.x", "meltdown")
    topics = [t for t, _ in svc.test_events]
    assert "alert.raised" in topics and "alert.fatal" in topics


def test_pending_survives_restart(svc, tmp_path):
    ids = [svc.raise_alert("info", "nif.t.x", f"a{i}", ["ok"]) for i in range(3)]
    svc.respond(ids[0], "ok", "op")
    before = [a.id for a in svc.pending(mark_presented=False)]

    svc2 = AlertService(store=svc.test_store, clock=SimClock())
    after = [a.id for a in svc2.pending(mark_presented=False)]
    assert after == before
    # ids continue strictly increasing after restart
    assert svc2.raise_alert("info", "nif.t.x", "next") > max(ids)


def test_raise_never_fails_during_store_outage(tmp_path):
    class FlakyStore:
        def __init__(self, store):
            self.store = store
            self.down = False

        def put(self, *a, **kw):
            if self.down:
                from minif.persist import StorageFailure
                raise StorageFailure("injected outage")
            return self.store.put(*a, **kw)

        def load_class(self, cls):
            return self.store.load_class(cls)

    backing = Store(tmp_path)
    flaky = FlakyStore(backing)
    svc = AlertService(store=flaky, clock=SimClock())
    flaky.down = True
    alert_id = svc.raise_alert("serious", "nif.t.x", "during outage")
    assert svc.get(alert_id).state == "raised"
    assert backing.get("alert", f"{alert_id:08d}") is None
    flaky.down = False
    assert svc.flush_persistence() == 0
    assert backing.get("alert", f"{alert_id:08d}") is not None
    txs = [t for t in svc.history() if t["alert_id"] == alert_id]
    assert [t["action"] for t in txs] == ["raise"]
    backing.close()


def test_scripted_operator_in_process(svc):
    op = ScriptedOperator(service=svc, script=[
        {"match": "alignment", "choice": "algorithm-b"},
        {"choice": "acknowledge"},
    ])
    a1 = svc.raise_alert("info", "nif.t.x", "alignment branch choice",
                         ["algorithm-a", "algorithm-b"])
    op.on_alert(a1, "alignment branch choice", ["algorithm-a", "algorithm-b"])
    assert svc.wait(a1, timeout_s=1) == "algorithm-b"
    a2 = svc.raise_alert("info", "nif.t.x", "plain gate", ["acknowledge"])
    op.on_alert(a2, "plain gate", ["acknowledge"])
    assert svc.wait(a2, timeout_s=1) == "acknowledge"

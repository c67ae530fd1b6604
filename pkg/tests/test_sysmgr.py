"""Heartbeat liveness thresholds, failover policy, state events."""

import pytest

from minif.clock import SimClock
from minif.errors import MinifError
from minif.sysmgr import (Duplicate, PolicyExhausted, ProcessRecord,
                          SystemManager, Unknown)


@pytest.fixture
def mgr():
    clock = SimClock(start_ms=1_000_000)
    events = []
    spawned = []

    def spawner(command):
        spawned.append(command)
        return 40000 + len(spawned)

    m = SystemManager(clock=clock, publish=lambda t, p: events.append((t, p)),
                      spawner=spawner)
    m.test_clock = clock
    m.test_events = events
    m.test_spawned = spawned
    return m


def reg(mgr, pid="fep-a", policy="never", attempts=0, backoff=500):
    mgr.register_process(ProcessRecord(process_id=pid, spawn_command=f"run {pid}",
                                       restart_policy=policy, max_attempts=attempts,
                                       backoff_ms=backoff))


def test_register_and_first_heartbeat_up(mgr):
    reg(mgr)
    assert mgr.state_of("fep-a") == "starting"
    mgr.heartbeat("fep-a", 1)
    assert mgr.state_of("fep-a") == "up"
    assert [(p["old"], p["new"]) for _, p in mgr.test_events] == [("starting", "up")]


def test_duplicate_registration(mgr):
    reg(mgr)
    with pytest.raises(Duplicate):
        reg(mgr)


def test_unknown_heartbeat(mgr):
    with pytest.raises(Unknown):
        mgr.heartbeat("ghost", 1)


def test_seq_regression_ignored(mgr):
    reg(mgr)
    mgr.heartbeat("fep-a", 5)
    first_ts = mgr.report()[0]["last_heartbeat"]
    mgr.test_clock.advance(400)
    mgr.heartbeat("fep-a", 4)     # replay
    assert mgr.report()[0]["last_heartbeat"] == first_ts


def test_steady_heartbeats_never_false_death(mgr):
    reg(mgr)
    for seq in range(1, 61):
        mgr.heartbeat("fep-a", seq)
        mgr.test_clock.advance(1000)
        mgr.evaluate()
    assert mgr.state_of("fep-a") == "up"
    transitions = [(p["old"], p["new"]) for _, p in mgr.test_events]
    assert transitions == [("starting", "up")]


def test_suspect_then_dead_thresholds(mgr):
    reg(mgr)
    mgr.heartbeat("fep-a", 1)
    mgr.test_clock.advance(3500)           # 3.5 intervals of silence
    mgr.evaluate()
    assert mgr.state_of("fep-a") == "suspect"
    mgr.test_clock.advance(2000)           # 5.5 total
    mgr.evaluate()
    assert mgr.state_of("fep-a") == "dead"
    chain = [(p["old"], p["new"]) for _, p in mgr.test_events]
    assert chain == [("starting", "up"), ("up", "suspect"), ("suspect", "dead")]


def test_quiet_cluster_zero_events(mgr):
    for i in range(4):
        reg(mgr, pid=f"fep-{i}")
    seq = 0
    for _ in range(60):
        seq += 1
        for i in range(4):
            mgr.heartbeat(f"fep-{i}", seq)
        mgr.test_clock.advance(1000)
        mgr.evaluate()
    chain = [(p["process_id"], p["new"]) for _, p in mgr.test_events]
    assert all(new == "up" for _, new in chain)
    assert len(chain) == 4                  # just the initial starting->up


def test_failover_respawns_with_backoff(mgr):
    reg(mgr, policy="respawn", attempts=3, backoff=500)
    mgr.heartbeat("fep-a", 1)
    mgr.test_clock.advance(5500)
    mgr.evaluate()
    assert mgr.state_of("fep-a") == "dead"
    assert mgr.test_spawned == []           # backoff not yet elapsed
    mgr.test_clock.advance(499)
    mgr.evaluate()
    assert mgr.test_spawned == []
    mgr.test_clock.advance(2)
    mgr.evaluate()
    assert mgr.test_spawned == ["run fep-a"]
    assert mgr.state_of("fep-a") == "starting"
    report = mgr.report()[0]
    assert report["incarnation"] == 2 and report["attempts_used"] == 1
    mgr.heartbeat("fep-a", 1)               # fresh incarnation restarts seq
    assert mgr.state_of("fep-a") == "up"


def test_policy_never_no_respawn(mgr):
    reg(mgr, policy="never")
    mgr.heartbeat("fep-a", 1)
    mgr.test_clock.advance(10_000)
    mgr.evaluate()
    mgr.test_clock.advance(10_000)
    mgr.evaluate()
    assert mgr.state_of("fep-a") == "dead"
    assert mgr.test_spawned == []
    with pytest.raises(MinifError):
        mgr.failover("fep-a")


def test_policy_exhausted_raises_fatal_alert(mgr):
    alerts = []
    mgr._raise_alert = lambda sev, src, text: alerts.append((sev, src, text))
    reg(mgr, policy="respawn", attempts=2, backoff=100)
    mgr.heartbeat("fep-a", 1)
    for round_ in range(3):
        mgr.test_clock.advance(6000)
        mgr.evaluate()                      # dead
        mgr.test_clock.advance(200)
        mgr.evaluate()                      # respawn or exhaust
    assert len(mgr.test_spawned) == 2
    assert mgr.state_of("fep-a") == "dead"
    assert alerts and alerts[0][0] == "fatal"
    with pytest.raises(PolicyExhausted):
        mgr.failover("fep-a")


def test_watch_stream_totally_ordered_per_process(mgr):
    seen = []
    mgr.watch(seen.append)
    reg(mgr, policy="respawn", attempts=1, backoff=100)
    mgr.heartbeat("fep-a", 1)
    mgr.test_clock.advance(3500)
    mgr.evaluate()
    mgr.test_clock.advance(2000)
    mgr.evaluate()
    mgr.test_clock.advance(200)
    mgr.evaluate()
    chain = [(e["old"], e["new"]) for e in seen]
    assert chain == [("starting", "up"), ("up", "suspect"), ("suspect", "dead"),
                     ("dead", "starting")]
    # incarnation bumps on respawn and events carry it
    assert seen[-1]["incarnation"] == 2


def test_stats_ride_heartbeats(mgr):
    captured = []
    mgr._ingest_stats = lambda pid, stats: captured.append((pid, stats))
    reg(mgr)
    mgr.heartbeat("fep-a", 1, {"cpu": 12.5, "mem_mb": 48.2, "queues": 3, "pid": 777})
    assert captured[0][0] == "fep-a"
    assert captured[0][1]["cpu"] == 12.5
    assert mgr.report()[0]["pid"] == 777


def test_starting_process_that_never_heartbeats_dies(mgr):
    reg(mgr, policy="respawn", attempts=1, backoff=100)
    mgr.test_clock.advance(5100)
    mgr.evaluate()
    assert mgr.state_of("fep-a") == "dead"

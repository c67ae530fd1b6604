"""Deadband decisions checked against an independent replay oracle."""

import math
import random

import pytest

from minif.clock import SimClock
from minif.statmon import (BadConfig, ChannelConfig, StatusMonitor, TagMismatch,
                           UnknownChannel)
from tests.helpers import deadband_replay, fold_updates


def make_monitor(deadband=0.5, interval=10_000, tag="real", channel="nif.d.m1.position"):
    clock = SimClock(start_ms=1_000_000)
    published = []
    mon = StatusMonitor(publish=lambda t, p, r: published.append((t, p)), clock=clock)
    mon.register_channel(channel, tag, deadband, interval)
    return mon, clock, published, channel


def test_first_sample_is_initial():
    mon, clock, published, ch = make_monitor()
    u = mon.ingest(ch, 1.0)
    assert u.reason == "initial" and u.seq == 1
    assert published[0][0] == "status." + ch


def test_delta_compares_against_last_published():
    mon, clock, pub, ch = make_monitor(deadband=0.5)
    mon.ingest(ch, 1.0)
    results = [mon.ingest(ch, v) for v in (1.2, 1.4, 1.6)]
    assert results[0] is None and results[1] is None
    assert results[2] is not None and results[2].reason == "delta"


def test_identical_value_within_interval_suppressed():
    mon, clock, pub, ch = make_monitor()
    mon.ingest(ch, 2.0)
    clock.advance(100)
    assert mon.ingest(ch, 2.0) is None


def test_heartbeat_republish():
    mon, clock, pub, ch = make_monitor(interval=1_000)
    mon.ingest(ch, 2.0)
    for _ in range(10):
        clock.advance(500)
        mon.ingest(ch, 2.0)
    reasons = [p["reason"].value for _, p in pub]
    # constant input for 5 s at a 1 s heartbeat: initial + one per interval
    assert reasons[0] == "initial"
    assert reasons.count("heartbeat") == 5
    assert len(pub) == math.ceil(5000 / 1000) + 1


def test_discrete_bool_forces_zero_deadband():
    mon, clock, pub, ch = make_monitor(deadband=5.0, tag="bool")
    mon.ingest(ch, True)
    u = mon.ingest(ch, False)
    assert u is not None and u.reason == "delta"


def test_bad_config():
    mon, clock, pub, ch = make_monitor()
    with pytest.raises(BadConfig):
        mon.configure_channel(ChannelConfig(ch, deadband=-1.0))
    with pytest.raises(BadConfig):
        mon.configure_channel(ChannelConfig(ch, max_interval_ms=50))
    with pytest.raises(UnknownChannel):
        mon.configure_channel(ChannelConfig("nif.d.nope.x", deadband=1.0))


def test_unknown_channel_and_tag_mismatch():
    mon, clock, pub, ch = make_monitor()
    with pytest.raises(UnknownChannel):
        mon.ingest("nif.d.nope.x", 1.0)
    with pytest.raises(TagMismatch):
        mon.ingest(ch, True)


def test_reconfigure_tightens_rate():
    """Replay the same drift with delta=1 and delta=0.1: publication count rises."""
    samples = [(i * 100, math.sin(i / 40.0) * 3) for i in range(500)]
    counts = {}
    for db in (1.0, 0.1):
        mon, clock, pub, ch = make_monitor(deadband=db, interval=10 ** 7)
        for ts, v in samples:
            mon.ingest(ch, v, ts_ms=1_000_000 + ts)
        counts[db] = len(pub)
        oracle = deadband_replay([(1_000_000 + ts, v) for ts, v in samples], db, 10 ** 7)
        assert len(oracle) == len(pub)
    assert counts[0.1] > counts[1.0]


def test_random_walk_suppression_and_replay_oracle():
    rng = random.Random(99)
    deadband = 1.0
    sigma = deadband / 2
    value = 0.0
    samples = []
    for i in range(10_000):
        value += rng.gauss(0.0, sigma)
        samples.append((1_000_000 + i * 100, value))
    mon, clock, pub, ch = make_monitor(deadband=deadband, interval=10_000_000)
    updates = [mon.ingest(ch, v, ts_ms=ts) for ts, v in samples]
    published = [(i, u.reason) for i, u in enumerate(updates) if u is not None]
    assert len(published) / len(samples) < 0.20
    # every delta-publish actually exceeded the deadband vs last published
    last = None
    for i, reason in published:
        if reason == "delta":
            assert abs(samples[i][1] - last) >= deadband
        last = samples[i][1]
    # independent replay reproduces every decision exactly
    assert deadband_replay(samples, deadband, 10_000_000) == published


def test_seq_strictly_increasing():
    mon, clock, pub, ch = make_monitor(deadband=0.1, interval=10 ** 7)
    for i in range(50):
        mon.ingest(ch, float(i))
    seqs = [p["seq"].value for _, p in pub]
    assert seqs == sorted(set(seqs))


def test_snapshot_is_fold_of_published():
    mon, clock, pub, _ = make_monitor()
    mon.register_channel("nif.d.m2.position", "real", 0.5)
    updates = []
    mon2_channels = ["nif.d.m1.position", "nif.d.m2.position"]
    rng = random.Random(5)
    for i in range(200):
        ch = rng.choice(mon2_channels)
        u = mon.ingest(ch, rng.uniform(0, 100))
        if u:
            updates.append(u)
    snap = mon.snapshot("nif.d.")
    folded = fold_updates(updates)
    assert set(snap) == set(folded)
    for ch, u in snap.items():
        assert u.value == folded[ch].value and u.seq == folded[ch].seq


def test_snapshot_empty_prefix_match():
    mon, clock, pub, ch = make_monitor()
    mon.ingest(ch, 1.0)
    assert mon.snapshot("zzz.") == {}


def test_vector_deadband_any_element():
    mon, clock, pub, ch = make_monitor(deadband=1.0, tag="vector-of-real")
    mon.ingest(ch, [1.0, 2.0, 3.0])
    assert mon.ingest(ch, [1.2, 2.2, 3.2]) is None
    u = mon.ingest(ch, [1.0, 2.0, 4.5])
    assert u is not None and u.reason == "delta"
    # length change always publishes
    assert mon.ingest(ch, [1.0, 2.0]) is not None


def test_suppression_total_published_le_ingested():
    mon, clock, pub, ch = make_monitor(deadband=2.0, interval=10 ** 7)
    rng = random.Random(1)
    n = 500
    for i in range(n):
        mon.ingest(ch, rng.uniform(0, 1), ts_ms=1_000_000 + i)
    assert len(pub) <= n

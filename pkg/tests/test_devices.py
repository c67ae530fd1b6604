"""Device physics, reservation gating, status fidelity."""

import random

import pytest

from minif.clock import SimClock
from minif.config.records import DeviceRecord
from minif.devices import (Aborted, BadArgs, BadAttrs, Digitizer, Motor,
                           NotReserved, OutOfLimits, OverLimit, Sensor, Supply,
                           WrongKey, build_device)
from minif.reserve import ReservationService
from minif.statmon import StatusMonitor
from minif.values import attrs, sv_real


def motor_record(**over):
    init = dict(velocity=5.0, limit_min=0.0, limit_max=100.0, deadband=0.05)
    init.update(over.pop("init", {}))
    return DeviceRecord(name=over.pop("name", "nif.b001.align.m001"), kind="motor",
                        process_id="fep-motion-01", init_attrs=attrs(**init),
                        persisted_state=over.pop("state", {}))


def supply_record(**over):
    init = dict(limit_v=500.0, ramp_rate=10.0, deadband=0.5)
    init.update(over.pop("init", {}))
    return DeviceRecord(name="nif.b001.power.ps001", kind="supply",
                        process_id="fep-power-01", init_attrs=attrs(**init),
                        persisted_state=over.pop("state", {}))


@pytest.fixture
def rig():
    """monitor + reservation service + sim clock, no bus."""
    clock = SimClock(start_ms=10_000_000)
    published = []
    mon = StatusMonitor(publish=lambda t, p, r: published.append((t, p)), clock=clock)
    resv = ReservationService(clock=clock)

    class Rig:
        pass

    r = Rig()
    r.clock, r.monitor, r.published, r.resv = clock, mon, published, resv
    r.validator = resv.validate
    return r


def make_motor(rig, **over):
    return Motor(motor_record(**over), rig.monitor, validator=rig.validator,
                 clock=rig.clock)


def tick_for(rig, devices, seconds, dt=0.05):
    steps = round(seconds / dt)
    for _ in range(steps):
        rig.clock.advance(int(dt * 1000))
        for d in devices:
            d.sim_tick(dt)


def test_motor_restores_persisted_position(rig):
    m = Motor(motor_record(state=attrs(position=5.0)), rig.monitor, clock=rig.clock)
    assert m.position == 5.0


def test_missing_required_attr(rig):
    rec = motor_record()
    del rec.init_attrs["velocity"]
    with pytest.raises(BadAttrs):
        Motor(rec, rig.monitor)


def test_init_publishes_one_update_per_channel(rig):
    m = make_motor(rig)
    channels = [t for t, _ in rig.published]
    assert sorted(channels) == sorted("status." + c for c in m.status_channels)
    assert all(p["reason"].value == "initial" for _, p in rig.published)


def test_motor_kinematics_2s_to_target(rig):
    m = make_motor(rig)
    key = rig.resv.reserve(m.name, "op1")
    report = m.move_to(10.0, key)
    assert not report["completed"].value
    assert report["eta_ms"].value == 2000
    tick_for(rig, [m], 1.9)
    assert m.moving and m.position < 10.0
    tick_for(rig, [m], 0.2)
    assert not m.moving
    assert m.position == pytest.approx(10.0, abs=1e-9)


def test_motor_move_without_key(rig):
    m = make_motor(rig)
    with pytest.raises(NotReserved):
        m.move_to(10.0, None)


def test_motor_move_with_foreign_key(rig):
    m = make_motor(rig)
    rig.resv.reserve(m.name, "op1")
    with pytest.raises(WrongKey):
        m.move_to(10.0, "f" * 32)
    assert m.position == 0.0 and not m.moving


def test_motor_out_of_limits(rig):
    m = make_motor(rig)
    key = rig.resv.reserve(m.name, "op1")
    with pytest.raises(OutOfLimits):
        m.move_to(999.0, key)
    assert m.position == 0.0 and not m.moving


def test_motor_idempotent_when_at_target(rig):
    m = Motor(motor_record(state=attrs(position=10.0)), rig.monitor,
              validator=rig.validator, clock=rig.clock)
    key = rig.resv.reserve(m.name, "op1")
    assert m.move_to(10.0, key)["completed"].value


def test_motor_halt_aborts_move(rig):
    m = make_motor(rig)
    key = rig.resv.reserve(m.name, "op1")
    m.move_to(50.0, key)
    tick_for(rig, [m], 1.0)
    m.halt(key)
    assert not m.moving
    halted_at = m.position
    assert 0 < halted_at < 50.0
    with pytest.raises(Aborted):
        m.wait_settled(lambda dt: tick_for(rig, [m], dt), max_s=1.0, target=50.0)
    assert m.position == halted_at


def test_two_half_ticks_equal_one(rig):
    a = make_motor(rig, name="nif.b001.align.m001")
    b = make_motor(rig, name="nif.b001.align.m002")
    ka = rig.resv.reserve(a.name, "op")
    kb = rig.resv.reserve(b.name, "op")
    a.move_to(42.0, ka)
    b.move_to(42.0, kb)
    a.sim_tick(0.05)
    b.sim_tick(0.025)
    b.sim_tick(0.025)
    assert a.position == pytest.approx(b.position, abs=1e-9)


def test_motor_never_leaves_limits_random_ticks(rig):
    m = make_motor(rig, init=dict(limit_max=20.0))
    key = rig.resv.reserve(m.name, "op1")
    rng = random.Random(13)
    for i in range(10_000):
        if i % 500 == 0:
            m.move_to(rng.uniform(0.0, 20.0), key)
        m.sim_tick(rng.uniform(0.001, 0.2))
        assert 0.0 <= m.position <= 20.0


def test_supply_disable_zeroes_output_immediately(rig):
    s = Supply(supply_record(), rig.monitor, validator=rig.validator, clock=rig.clock)
    key = rig.resv.reserve(s.name, "op1")
    s.set_voltage(50.0, key)
    s.enable(key)
    tick_for(rig, [s], 5.0)
    assert s.output_v == pytest.approx(50.0)
    s.disable(key)
    assert s.output_v == 0.0
    tick_for(rig, [s], 1.0)
    assert s.output_v == 0.0  # stays at zero while disabled


def test_supply_ramp_rate(rig):
    s = Supply(supply_record(), rig.monitor, validator=rig.validator, clock=rig.clock)
    key = rig.resv.reserve(s.name, "op1")
    s.set_voltage(20.0, key)
    s.enable(key)
    tick_for(rig, [s], 1.9)
    assert s.output_v < 20.0
    tick_for(rig, [s], 0.2)
    assert s.output_v == pytest.approx(20.0)


def test_supply_over_limit(rig):
    s = Supply(supply_record(), rig.monitor, validator=rig.validator, clock=rig.clock)
    key = rig.resv.reserve(s.name, "op1")
    with pytest.raises(OverLimit):
        s.set_voltage(1000.0, key)
    assert s.setpoint_v == 0.0


def digitizer_record():
    return DeviceRecord(name="nif.b001.diag.dg001", kind="digitizer",
                        process_id="fep-diag-01", init_attrs=attrs(seed=1234))


def test_digitizer_acquire(rig):
    d = Digitizer(digitizer_record(), rig.monitor, validator=rig.validator,
                  clock=rig.clock)
    key = rig.resv.reserve(d.name, "op1")
    wave = d.acquire(1000, 1e-6, key)
    assert len(wave.samples) == 1000
    assert wave.dt == 1e-6


def test_digitizer_deterministic_per_seed_and_shot(rig):
    d = Digitizer(digitizer_record(), rig.monitor, validator=rig.validator,
                  clock=rig.clock)
    key = rig.resv.reserve(d.name, "op1")
    d.set_shot(7, key)
    w1 = d.acquire(256, 1e-6, key)
    w2 = d.acquire(256, 1e-6, key)
    assert w1.samples == w2.samples
    d.set_shot(8, key)
    w3 = d.acquire(256, 1e-6, key)
    assert w3.samples != w1.samples


def test_digitizer_bad_args(rig):
    d = Digitizer(digitizer_record(), rig.monitor, validator=rig.validator,
                  clock=rig.clock)
    key = rig.resv.reserve(d.name, "op1")
    with pytest.raises(BadArgs):
        d.acquire(0, 1e-6, key)
    with pytest.raises(BadArgs):
        d.acquire(1 << 17, 1e-6, key)
    with pytest.raises(BadArgs):
        d.acquire(16, 0.0, key)


def test_sensor_drifts_and_publishes(rig):
    rec = DeviceRecord(name="nif.b001.diag.sn001", kind="sensor",
                       process_id="fep-diag-01",
                       init_attrs=attrs(base=50.0, amp=3.0, period_s=10.0,
                                        noise=0.01, deadband=0.1, seed=5))
    s = Sensor(rec, rig.monitor, clock=rig.clock)
    before = len(rig.published)
    tick_for(rig, [s], 5.0)
    assert len(rig.published) > before
    assert abs(s.value - 50.0) < 4.0


def test_status_fidelity_within_deadband(rig):
    m = make_motor(rig)
    key = rig.resv.reserve(m.name, "op1")
    m.move_to(33.33, key)
    tick_for(rig, [m], 10.0)
    snap = rig.monitor.snapshot(m.name)
    assert abs(snap[f"{m.name}.position"].value.value - m.position) < m.deadband
    assert snap[f"{m.name}.moving"].value.value == m.moving


def test_reservation_gate_fuzz_no_unkeyed_mutation(rig):
    """Absent/stale/foreign keys never mutate any device."""
    m = make_motor(rig)
    s = Supply(supply_record(), rig.monitor, validator=rig.validator, clock=rig.clock)
    d = Digitizer(digitizer_record(), rig.monitor, validator=rig.validator,
                  clock=rig.clock)
    stale = rig.resv.reserve(m.name, "op1")
    rig.resv.release(stale)
    foreign = rig.resv.reserve(s.name, "other")  # valid for s only
    rng = random.Random(3)
    mutations = 0
    before = (m.state_payload(), s.state_payload(), d.state_payload())
    calls = [
        lambda k: m.move_to(10.0, k), lambda k: m.halt(k),
        lambda k: s.set_voltage(10.0, k), lambda k: s.enable(k),
        lambda k: d.acquire(16, 1e-6, k), lambda k: d.set_shot(3, k),
    ]
    for i in range(5000):
        key = rng.choice([None, stale, "X" * 32, foreign])
        call = rng.choice(calls)
        if call.__code__ is calls[2].__code__ and key == foreign:
            continue  # that pair is legitimately valid
        is_supply_call = call in calls[2:4]
        if key == foreign and is_supply_call:
            continue
        try:
            call(key)
            mutations += 1
        except (NotReserved, WrongKey):
            pass
    assert mutations == 0
    assert (m.state_payload(), s.state_payload(), d.state_payload()) == before

import math

import numpy as np
import pytest

from models.codebook import CodebookKey, CodebookMode
from models.errors import ProtocolError
from models.handover.state_machine import (Attach, Complete, ConfigureSurface, ContextTransfer, Degrade,
                                           HandoverCommand, HandoverRequest, HoMachine, HoParams, HoState,
                                           Interrupt, LinkLost, MbbCheck, MeasureReflect, MeasureSlot, MrTimer,
                                           Protocol, RachDone, Reattach, ReflectReport, ReflectSample, Revert,
                                           ScanReport, Settled, SlotReport, StartDuplication, StopDuplication,
                                           UeMeasurement, XnAck, new_machine, step, step_sa, step_ws, tracked_key)

PARAMS = HoParams(l_min=-60.0, l_max=-50.0)
PLAN = ((1, (20.0, 25.0)),)


def _types(actions):
    return [type(a) for a in actions]


def _report(t, serving, neighbor):
    return ScanReport(t, (UeMeasurement(0, serving, ((1, neighbor),)),))


# ─── SA ─────────────────────────────────────────────────────────────────────────

def test_sa_scan_blacks_out_then_degrades():
    m = new_machine(Protocol.SA, 0, (0,), PARAMS)
    m, actions = step(m, [MrTimer(240)], 240)
    assert m.state is HoState.SCANNING
    assert actions == [Interrupt((0,), 240, 20, "blackout-scan"), Degrade((0,), 260, 50, 0.5)]
    assert m.due(259) == [] and m.due(260) == ["scan_done"]


def test_sa_hands_over_after_time_to_trigger():
    m = new_machine(Protocol.SA, 0, (0,), PARAMS)
    m, _ = step(m, [MrTimer(240)], 240)
    m, actions = step(m, [_report(260, -80.0, -60.0)], 260)
    assert m.state is HoState.ATTACHED and actions == []

    m, _ = step(m, [MrTimer(400)], 400)
    m, actions = step(m, [_report(420, -80.0, -60.0)], 420)
    assert m.state is HoState.EXECUTING_RACH and m.target == 1
    assert _types(actions) == [HandoverRequest, HandoverCommand, Interrupt]
    assert actions[0].delta_min == pytest.approx(20.0)
    assert actions[2].tag == "blackout-rach" and actions[2].duration == 40

    m, actions = step(m, [RachDone(460)], 460)
    assert m.state is HoState.COMPLETING and m.serving == 1
    assert actions == [Complete((0,), 0, 1)]
    m, _ = step(m, [Settled(461)], 461)
    assert m.state is HoState.ATTACHED and m.trackers == ()


def test_sa_broken_condition_restarts_time_to_trigger():
    m = new_machine(Protocol.SA, 0, (0,), PARAMS)
    for t, neighbor in ((240, -60.0), (400, -75.0), (560, -60.0)):
        m, _ = step(m, [MrTimer(t)], t)
        m, actions = step(m, [_report(t + 20, -80.0, neighbor)], t + 20)
        assert actions == []
    assert m.tracker(1).condition_since == 580


def test_sa_ignores_mr_timer_while_busy_and_rejects_stray_events():
    m = new_machine(Protocol.SA, 0, (0,), PARAMS)
    m, _ = step(m, [MrTimer(240)], 240)
    same, actions = step(m, [MrTimer(250)], 250)
    assert same == m and actions == []
    with pytest.raises(ProtocolError) as err:
        step(m, [RachDone(250)], 250)
    assert err.value.state == "scanning" and err.value.event == "rach-done"
    with pytest.raises(ProtocolError):
        step_ws(m, [MrTimer(250)], 250)


def test_link_loss_and_reattach():
    m = new_machine(Protocol.SA, 0, (0,), PARAMS)
    m, _ = step(m, [LinkLost(300)], 300)
    assert m.state is HoState.OUTAGE
    m, actions = step(m, [LinkLost(301)], 301)
    assert actions == []
    m, actions = step(m, [Reattach(400, 1)], 400)
    assert m.state is HoState.ATTACHED and m.serving == 1
    assert actions == [Attach(1)]
    with pytest.raises(ProtocolError):
        step(m, [Reattach(401, 0)], 401)


def test_state_sets_are_per_protocol():
    with pytest.raises(ProtocolError):
        HoMachine(Protocol.SA, 0, (0,), state=HoState.PREPARING)
    with pytest.raises(ProtocolError):
        HoMachine(Protocol.WS, 0, (0,), state=HoState.EXECUTING_RACH)


# ─── WS ─────────────────────────────────────────────────────────────────────────

def _ws_deciding(m_r=30.0):
    m = new_machine(Protocol.WS, 0, (0,), PARAMS, theta_t=10.0)
    m, actions = step(m, [MrTimer(240, 10.0, PLAN)], 240)
    assert m.state is HoState.SCANNING and _types(actions) == [MeasureReflect]
    assert m.timer("slot1_done") == 245
    samples = (ReflectSample(1, 20.0, m_r - 5.0, 0.0), ReflectSample(1, 25.0, m_r, 0.0))
    m, actions = step(m, [ReflectReport(245, samples)], 245)
    assert m.state is HoState.PREPARING
    assert actions == [MeasureSlot(10.0, 25.0, 0.25, 245)]
    return step(m, [SlotReport(250, (-55.0,), 0.0, (0.0,))], 250)


def test_ws_starts_with_tracked_key():
    m = new_machine(Protocol.WS, 0, (0, 1), PARAMS, theta_t=10.0)
    assert m.surface_key == CodebookKey(10.0, 0.0, 0.0, CodebookMode.SINGLE)
    assert new_machine(Protocol.SA, 0, (0,)).surface_key is None


def test_ws_without_neighbors_stays_attached_and_retracks():
    m = new_machine(Protocol.WS, 0, (0,), PARAMS, theta_t=10.0)
    m, actions = step(m, [MrTimer(240, 15.0, ())], 240)
    assert m.state is HoState.ATTACHED
    assert actions == [ConfigureSurface(tracked_key(15.0))]
    assert m.theta_t == 15.0


def test_ws_scan_without_finite_sample_returns_to_attached():
    m = new_machine(Protocol.WS, 0, (0,), PARAMS, theta_t=10.0)
    m, _ = step(m, [MrTimer(240, 10.0, PLAN)], 240)
    m, actions = step(m, [ReflectReport(245, (ReflectSample(1, 20.0, -math.inf, 0.0),))], 245)
    assert m.state is HoState.ATTACHED and actions == []


def test_ws_small_margin_stays_and_restores_the_surface():
    m, actions = _ws_deciding(m_r=15.0)
    assert m.state is HoState.ATTACHED
    assert actions == [ConfigureSurface(tracked_key(10.0))]


def test_ws_non_finite_slot_measurement_stays():
    m = new_machine(Protocol.WS, 0, (0,), PARAMS, theta_t=10.0)
    m, _ = step(m, [MrTimer(240, 10.0, PLAN)], 240)
    m, _ = step(m, [ReflectReport(245, (ReflectSample(1, 25.0, 30.0, 0.0),))], 245)
    m, actions = step(m, [SlotReport(250, (-math.inf,), 0.0, (0.0,))], 250)
    assert m.state is HoState.ATTACHED
    assert not any(isinstance(a, HandoverRequest) for a in actions)


def test_ws_make_before_break_completes():
    m, actions = _ws_deciding()
    assert m.state is HoState.DECIDING and m.target == 1
    assert isinstance(actions[0], HandoverRequest) and actions[0].delta_min == pytest.approx(20.0)
    assert m.timer("xn_ack") == 255

    m, actions = step(m, [XnAck(255, 20.0)], 255)
    assert m.state is HoState.EXECUTING_MBB
    mbb_key = CodebookKey(10.0, 20.0, 0.5, CodebookMode.DUAL_TRANSMISSIVE)
    assert actions == [HandoverCommand((0,), 1), ContextTransfer(0, 1), ConfigureSurface(mbb_key),
                       StartDuplication(1)]
    assert m.surface_key == mbb_key and m.timer("mbb_check") == 415

    m, actions = step(m, [MbbCheck(415, (-50.0,), (-70.0,))], 415)
    assert m.state is HoState.COMPLETING and m.serving == 1 and m.theta_t == 20.0
    assert actions == [StopDuplication(1), Complete((0,), 0, 1), ConfigureSurface(tracked_key(20.0))]
    m, _ = step(m, [Settled(416)], 416)
    assert m.state is HoState.ATTACHED


def test_ws_reverts_when_target_fades():
    m, _ = _ws_deciding()
    m, _ = step(m, [XnAck(255, 20.0)], 255)
    m, actions = step(m, [MbbCheck(415, (-75.0,), (-70.0,))], 415)
    assert m.state is HoState.REVERTING and m.serving == 0
    assert actions == [StopDuplication(0), Revert(0), ConfigureSurface(tracked_key(10.0))]
    m, _ = step(m, [Settled(416)], 416)
    assert m.state is HoState.ATTACHED and m.surface_key == tracked_key(10.0)


def test_ws_waits_while_condition_holds_short_of_time_to_trigger():
    params = HoParams(l_min=-60.0, l_max=-50.0, ttt_ms=400)
    m = new_machine(Protocol.WS, 0, (0,), params, theta_t=10.0)
    m, _ = step(m, [MrTimer(240, 10.0, PLAN)], 240)
    m, _ = step(m, [ReflectReport(245, (ReflectSample(1, 25.0, 30.0, 0.0),))], 245)
    m, _ = step(m, [SlotReport(250, (-55.0,), 0.0, (0.0,))], 250)
    m, _ = step(m, [XnAck(255, 20.0)], 255)
    m, actions = step(m, [MbbCheck(415, (-50.0,), (-70.0,))], 415)
    assert m.state is HoState.EXECUTING_MBB and actions == []
    assert m.timer("mbb_check") == 575


def test_ws_rejects_sa_events():
    m = new_machine(Protocol.WS, 0, (0,), PARAMS, theta_t=10.0)
    with pytest.raises(ProtocolError):
        step(m, [RachDone(100)], 100)
    with pytest.raises(ProtocolError):
        step_sa(m, [MrTimer(100)], 100)


# ─── Randomized exploration ─────────────────────────────────────────────────────

FUZZ_PLAN = ((0, (20.0,)), (1, (20.0, 25.0)), (2, (30.0,)))


def _random_event(rng, protocol, t):
    strong = rng.random() < 0.8
    kinds = ["mr", "settled", "reattach", "lost", "rach"]
    if protocol is Protocol.SA:
        kinds += ["scan"] * 3
    else:
        kinds += ["reflect", "slot", "xn", "mbb"] * 2
    kind = rng.choice(kinds)
    if kind == "lost":
        # rare, so deep states stay reachable
        return LinkLost(t) if rng.random() < 0.2 else Settled(t)
    if kind == "mr":
        theta = float(rng.choice([0.0, 10.0, -15.0]))
        return MrTimer(t, theta, FUZZ_PLAN) if protocol is Protocol.WS else MrTimer(t)
    if kind == "settled":
        return Settled(t)
    if kind == "reattach":
        return Reattach(t, int(rng.integers(0, 3)))
    if kind == "rach":
        return RachDone(t)
    if kind == "scan":
        serving = -90.0
        return ScanReport(t, (UeMeasurement(0, serving, tuple(
            (g, serving + (20.0 if strong else -5.0)) for g in range(3))),))
    if kind == "reflect":
        return ReflectReport(t, tuple(ReflectSample(int(g), 20.0, -40.0 if strong else -math.inf, -3.0)
                                      for g in rng.integers(0, 3, 2)))
    if kind == "slot":
        return SlotReport(t, (-130.0 if strong else -60.0,), -1.0, (8.0,))
    if kind == "xn":
        return XnAck(t, float(rng.choice([25.0, -30.0])))
    return MbbCheck(t, (-60.0 if strong else -100.0,), (-80.0,))


@pytest.mark.parametrize("protocol", [Protocol.SA, Protocol.WS])
def test_random_event_sequences_keep_the_machine_sound(protocol):
    forbidden = HoState.EXECUTING_MBB if protocol is Protocol.SA else HoState.EXECUTING_RACH
    deep = HoState.EXECUTING_RACH if protocol is Protocol.SA else HoState.EXECUTING_MBB
    visited = set()
    rejected = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = new_machine(protocol, 0, (0,), PARAMS, theta_t=0.0)
        t = 0
        for _ in range(500):
            t += int(rng.integers(1, 20))
            event = _random_event(rng, protocol, t)
            before = m
            try:
                m, _ = step(m, [event], t)
            except ProtocolError:
                rejected += 1
                assert m is before and m == before
            assert isinstance(m.state, HoState)
            assert m.state is not forbidden
            visited.add(m.state)
    assert deep in visited
    assert rejected > 0

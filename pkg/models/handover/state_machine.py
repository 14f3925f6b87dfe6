"""
Handover state machines for the standalone baseline (SA) and the surface-assisted
protocol (WS), as pure step functions (machine, events, t) -> (machine', actions).

SA runs one machine per UE: every MR period the UE pauses data to scan, A3 picks the
target and a RACH gap detaches it. WS runs one machine for the whole vehicle: the
surface measures the neighbor through reflection in slot 1, bounds the serving aggregate
in slot 2, and a positive decision moves all UEs together through make-before-break.
Timers live on the machine; the driving engine turns due timers into the matching
measurement events.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

import numpy as np

from models.channel import loss_bounds
from models.codebook import CodebookKey, CodebookMode
from models.errors import ProtocolError
from models.handover.a3 import A3Tracker, a3_update
from models.handover.bounding import Decision, decide, estimate

logger = logging.getLogger(__name__)

_L_MIN, _L_MAX = loss_bounds(0.3, 1.0, 26.0)


class Protocol(str, Enum):
    SA = "sa-baseline"
    WS = "wall-street"


class HoState(str, Enum):
    ATTACHED = "attached"
    SCANNING = "scanning"
    PREPARING = "preparing"
    DECIDING = "deciding"
    EXECUTING_MBB = "executing-mbb"
    EXECUTING_RACH = "executing-rach"
    COMPLETING = "completing"
    REVERTING = "reverting"
    OUTAGE = "outage"


SA_STATES = {HoState.ATTACHED, HoState.SCANNING, HoState.EXECUTING_RACH, HoState.COMPLETING,
             HoState.OUTAGE}
WS_STATES = {HoState.ATTACHED, HoState.SCANNING, HoState.PREPARING, HoState.DECIDING,
             HoState.EXECUTING_MBB, HoState.COMPLETING, HoState.REVERTING, HoState.OUTAGE}


@dataclass(frozen=True)
class HoParams:
    h_db: float = 10.0
    ttt_ms: int = 150
    mr_period_ms: int = 160
    scan_blackout_ms: int = 20
    degrade_ms: int = 50
    degrade_factor: float = 0.5
    rach_ms: int = 40
    burst_ms: int = 5
    xn_ms: int = 5
    settle_ms: int = 1
    l_min: float = _L_MIN
    l_max: float = _L_MAX
    alpha_scan: float = 0.75
    alpha_slot2: float = 0.25
    alpha_mbb: float = 0.5


# ─── Events ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class UeMeasurement:
    ue_id: int
    serving: float
    neighbors: tuple[tuple[int, float], ...]  # (gnb_id, M_n)


@dataclass(frozen=True)
class MrTimer:
    """Measurement-report instant; WS also gets the tracked angle and the scan plan."""
    t: int
    theta_t: float | None = None
    scan_plan: tuple[tuple[int, tuple[float, ...]], ...] = ()
    name = "mr-timer"


@dataclass(frozen=True)
class ScanReport:
    t: int
    measurements: tuple[UeMeasurement, ...]
    name = "scan-report"


@dataclass(frozen=True)
class ReflectSample:
    gnb_id: int
    theta_r: float
    m_r: float
    g_w_ref: float


@dataclass(frozen=True)
class ReflectReport:
    t: int
    samples: tuple[ReflectSample, ...]
    name = "reflect-report"


@dataclass(frozen=True)
class SlotReport:
    t: int
    m_s: tuple[float, ...]  # per UE, machine UE order
    g_w_tra: float
    g_ue: tuple[float, ...]
    name = "slot-report"


@dataclass(frozen=True)
class XnAck:
    t: int
    theta_target: float
    name = "xn-ack"


@dataclass(frozen=True)
class RachDone:
    t: int
    name = "rach-done"


@dataclass(frozen=True)
class MbbCheck:
    t: int
    m_n: tuple[float, ...]
    m_s: tuple[float, ...]
    name = "mbb-check"


@dataclass(frozen=True)
class Settled:
    t: int
    name = "settled"


@dataclass(frozen=True)
class LinkLost:
    t: int
    name = "link-lost"


@dataclass(frozen=True)
class Reattach:
    t: int
    gnb_id: int
    theta_t: float | None = None
    name = "reattach"


# ─── Actions ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Interrupt:
    ue_ids: tuple[int, ...]
    start: int
    duration: int
    tag: str = "blackout-scan"


@dataclass(frozen=True)
class Degrade:
    ue_ids: tuple[int, ...]
    start: int
    duration: int
    factor: float = 0.5
    tag = "degrade"


@dataclass(frozen=True)
class ConfigureSurface:
    key: CodebookKey
    tag = "configure"


@dataclass(frozen=True)
class MeasureReflect:
    theta_t: float
    scan_plan: tuple[tuple[int, tuple[float, ...]], ...]
    alpha: float
    start: int
    tag = "meas"


@dataclass(frozen=True)
class MeasureSlot:
    theta_t: float
    theta_r: float
    alpha: float
    start: int
    tag = "meas"


@dataclass(frozen=True)
class HandoverRequest:
    target: int
    delta_min: float
    tag = "ho-decision"


@dataclass(frozen=True)
class HandoverCommand:
    ue_ids: tuple[int, ...]
    target: int
    tag = "ho-command"


@dataclass(frozen=True)
class ContextTransfer:
    ue_id: int
    target: int
    tag = "context-transfer"


@dataclass(frozen=True)
class StartDuplication:
    target: int
    tag = "dup-start"


@dataclass(frozen=True)
class StopDuplication:
    keep: int
    tag = "dup-stop"


@dataclass(frozen=True)
class Complete:
    ue_ids: tuple[int, ...]
    source: int
    target: int
    tag = "ho-complete"


@dataclass(frozen=True)
class Revert:
    serving: int
    tag = "revert"


@dataclass(frozen=True)
class Attach:
    gnb_id: int
    tag = "reattach"


# ─── Machine ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class WsPending:
    target: int | None = None
    theta_r: float | None = None
    m_r: float | None = None
    g_w_ref: float | None = None
    theta_target: float | None = None
    decided_at: int | None = None


@dataclass(frozen=True)
class HoMachine:
    protocol: Protocol
    serving: int
    ue_ids: tuple[int, ...]
    params: HoParams = HoParams()
    state: HoState = HoState.ATTACHED
    target: int | None = None
    trackers: tuple[tuple[int, A3Tracker], ...] = ()
    timers: tuple[tuple[str, int], ...] = ()
    theta_t: float | None = None
    surface_key: CodebookKey | None = None
    pending: WsPending = field(default_factory=WsPending)

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "ue_ids", tuple(self.ue_ids))
        allowed = SA_STATES if self.protocol is Protocol.SA else WS_STATES
        if self.state not in allowed:
            raise ProtocolError(self.state.value, "construct", self.protocol.value)

    def tracker(self, gnb_id: int) -> A3Tracker:
        for g, tr in self.trackers:
            if g == gnb_id:
                return tr
        return A3Tracker(self.params.h_db, self.params.ttt_ms)

    def due(self, t: int) -> list[str]:
        return [name for name, at in self.timers if at <= t]

    def timer(self, name: str) -> int | None:
        for n, at in self.timers:
            if n == name:
                return at
        return None


def tracked_key(theta_t: float) -> CodebookKey:
    """Single-beam transmissive key serving the UEs outside of measurement slots."""
    return CodebookKey(theta_t, 0.0, 0.0, CodebookMode.SINGLE)


def new_machine(protocol: Protocol, serving: int, ue_ids: Iterable[int], params: HoParams = HoParams(),
                theta_t: float | None = None) -> HoMachine:
    key = tracked_key(theta_t) if Protocol(protocol) is Protocol.WS and theta_t is not None else None
    return HoMachine(Protocol(protocol), int(serving), tuple(ue_ids), params, theta_t=theta_t,
                     surface_key=key)


def _illegal(m: HoMachine, event) -> ProtocolError:
    return ProtocolError(m.state.value, event.name, m.protocol.value)


def _after(m: HoMachine, **changes) -> HoMachine:
    return replace(m, **changes)


def _lost(m: HoMachine, event) -> tuple[HoMachine, list]:
    if m.state is HoState.OUTAGE:
        return m, []
    return _after(m, state=HoState.OUTAGE, target=None, timers=(), trackers=(), pending=WsPending()), []


def _reattach(m: HoMachine, event: Reattach) -> tuple[HoMachine, list]:
    if m.state is not HoState.OUTAGE:
        raise _illegal(m, event)
    actions = [Attach(event.gnb_id)]
    theta = m.theta_t if event.theta_t is None else event.theta_t
    key = m.surface_key
    if m.protocol is Protocol.WS and theta is not None:
        key = tracked_key(theta)
        actions.append(ConfigureSurface(key))
    return _after(m, state=HoState.ATTACHED, serving=event.gnb_id, theta_t=theta, surface_key=key), actions


# ─── SA baseline ────────────────────────────────────────────────────────────────

def _sa_one(m: HoMachine, event, t: int) -> tuple[HoMachine, list]:
    p = m.params
    if isinstance(event, LinkLost):
        return _lost(m, event)
    if isinstance(event, Reattach):
        return _reattach(m, event)
    if isinstance(event, MrTimer):
        if m.state is not HoState.ATTACHED:
            return m, []
        actions = [Interrupt(m.ue_ids, t, p.scan_blackout_ms, "blackout-scan"),
                   Degrade(m.ue_ids, t + p.scan_blackout_ms, p.degrade_ms, p.degrade_factor)]
        return _after(m, state=HoState.SCANNING, timers=(("scan_done", t + p.scan_blackout_ms),)), actions

    if isinstance(event, ScanReport) and m.state is HoState.SCANNING:
        trackers = dict(m.trackers)
        triggered = []
        for meas in event.measurements:
            if meas.ue_id not in m.ue_ids:
                continue
            for gnb_id, m_n in meas.neighbors:
                if gnb_id == m.serving:
                    continue
                tr, fired = a3_update(m.tracker(gnb_id), m_n, meas.serving, t)
                trackers[gnb_id] = tr
                if fired:
                    triggered.append((m_n, -gnb_id, gnb_id))
        m = _after(m, trackers=tuple(sorted(trackers.items())), timers=())
        if not triggered:
            return _after(m, state=HoState.ATTACHED), []
        best_n, _, target = max(triggered)
        logger.info("SA UE %s: A3 triggered towards gNB %d at %d ms", m.ue_ids, target, t)
        serving_m = next((x.serving for x in event.measurements if x.ue_id in m.ue_ids), math.nan)
        actions = [HandoverRequest(target, best_n - serving_m),
                   HandoverCommand(m.ue_ids, target),
                   Interrupt(m.ue_ids, t, p.rach_ms, "blackout-rach")]
        return _after(m, state=HoState.EXECUTING_RACH, target=target,
                      timers=(("rach_done", t + p.rach_ms),)), actions

    if isinstance(event, RachDone) and m.state is HoState.EXECUTING_RACH:
        actions = [Complete(m.ue_ids, m.serving, m.target)]
        return _after(m, state=HoState.COMPLETING, serving=m.target, target=None, trackers=(),
                      timers=(("settle", t + p.settle_ms),)), actions

    if isinstance(event, Settled) and m.state is HoState.COMPLETING:
        return _after(m, state=HoState.ATTACHED, timers=()), []

    raise _illegal(m, event)


def step_sa(machine: HoMachine, events: Iterable, t: int) -> tuple[HoMachine, list]:
    if machine.protocol is not Protocol.SA:
        raise ProtocolError(machine.state.value, "step_sa", machine.protocol.value)
    actions = []
    for event in events:
        machine, out = _sa_one(machine, event, t)
        actions += out
    return machine, actions


# ─── Wall-Street ────────────────────────────────────────────────────────────────

def _ws_one(m: HoMachine, event, t: int) -> tuple[HoMachine, list]:
    p = m.params
    if isinstance(event, LinkLost):
        return _lost(m, event)
    if isinstance(event, Reattach):
        return _reattach(m, event)

    if isinstance(event, MrTimer):
        if m.state is not HoState.ATTACHED:
            return m, []
        actions = []
        theta = m.theta_t if event.theta_t is None else event.theta_t
        key = m.surface_key
        if theta is not None and key != tracked_key(theta):
            key = tracked_key(theta)
            actions.append(ConfigureSurface(key))
        m = _after(m, theta_t=theta, surface_key=key)
        plan = tuple((g, tuple(a)) for g, a in event.scan_plan if g != m.serving)
        if theta is None or not plan:
            return m, actions
        actions.append(MeasureReflect(theta, plan, p.alpha_scan, t))
        done = t + p.burst_ms * len(plan)
        return _after(m, state=HoState.SCANNING, timers=(("slot1_done", done),)), actions

    if isinstance(event, ReflectReport) and m.state is HoState.SCANNING:
        best = None
        for s in event.samples:
            if s.gnb_id != m.serving and math.isfinite(s.m_r) and (best is None or s.m_r > best.m_r):
                best = s
        if best is None:
            return _after(m, state=HoState.ATTACHED, timers=()), []
        pending = WsPending(target=best.gnb_id, theta_r=best.theta_r, m_r=best.m_r, g_w_ref=best.g_w_ref)
        actions = [MeasureSlot(m.theta_t, best.theta_r, p.alpha_slot2, t)]
        return _after(m, state=HoState.PREPARING, pending=pending,
                      timers=(("slot2_done", t + p.burst_ms),)), actions

    if isinstance(event, SlotReport) and m.state is HoState.PREPARING:
        pend = m.pending
        finite = all(math.isfinite(v) for v in (*event.m_s, pend.m_r, pend.g_w_ref, event.g_w_tra))
        decision, est = Decision.STAY, None
        if finite:
            est = estimate(pend.m_r, event.m_s, pend.g_w_ref, event.g_w_tra, event.g_ue, p.l_min, p.l_max)
            if est.consistent:
                decision = decide(est.s1, est.ub_s, p.h_db)
        back = ConfigureSurface(m.surface_key) if m.surface_key is not None else None
        if decision is Decision.STAY:
            m = _after(m, state=HoState.ATTACHED, pending=WsPending(), timers=())
            return m, [back] if back else []
        logger.info("WS decision at %d ms: hand over %s to gNB %d (delta_min %.2f dB)",
                    t, m.ue_ids, pend.target, est.delta_min)
        pending = replace(pend, decided_at=t)
        actions = [HandoverRequest(pend.target, est.delta_min)] + ([back] if back else [])
        return _after(m, state=HoState.DECIDING, target=pend.target, pending=pending,
                      timers=(("xn_ack", t + p.xn_ms),)), actions

    if isinstance(event, XnAck) and m.state is HoState.DECIDING:
        key = CodebookKey(m.theta_t, event.theta_target, p.alpha_mbb, CodebookMode.DUAL_TRANSMISSIVE)
        tracker = A3Tracker(p.h_db, p.ttt_ms).seeded(m.pending.decided_at)
        actions = [HandoverCommand(m.ue_ids, m.target)]
        actions += [ContextTransfer(ue, m.target) for ue in m.ue_ids]
        actions += [ConfigureSurface(key), StartDuplication(m.target)]
        return _after(m, state=HoState.EXECUTING_MBB, surface_key=key,
                      pending=replace(m.pending, theta_target=event.theta_target),
                      trackers=((m.target, tracker),),
                      timers=(("mbb_check", t + p.mr_period_ms),)), actions

    if isinstance(event, MbbCheck) and m.state is HoState.EXECUTING_MBB:
        m_n = float(np.mean(event.m_n)) if len(event.m_n) else math.nan
        m_s = float(np.mean(event.m_s)) if len(event.m_s) else math.nan
        tracker, fired = a3_update(m.tracker(m.target), m_n, m_s, t)
        settle = (("settle", t + p.settle_ms),)
        if fired:
            key = tracked_key(m.pending.theta_target)
            actions = [StopDuplication(m.target), Complete(m.ue_ids, m.serving, m.target), ConfigureSurface(key)]
            logger.info("WS handover to gNB %d complete at %d ms", m.target, t)
            return _after(m, state=HoState.COMPLETING, serving=m.target, target=None,
                          theta_t=m.pending.theta_target, surface_key=key, trackers=(),
                          pending=WsPending(), timers=settle), actions
        if tracker.condition_since is None:
            key = tracked_key(m.theta_t)
            actions = [StopDuplication(m.serving), Revert(m.serving), ConfigureSurface(key)]
            logger.info("WS reverting to gNB %d at %d ms", m.serving, t)
            return _after(m, state=HoState.REVERTING, target=None, surface_key=key, trackers=(),
                          pending=WsPending(), timers=settle), actions
        return _after(m, trackers=((m.target, tracker),),
                      timers=(("mbb_check", t + p.mr_period_ms),)), []

    if isinstance(event, Settled) and m.state in (HoState.COMPLETING, HoState.REVERTING):
        return _after(m, state=HoState.ATTACHED, timers=()), []

    raise _illegal(m, event)


def step_ws(machine: HoMachine, events: Iterable, t: int) -> tuple[HoMachine, list]:
    if machine.protocol is not Protocol.WS:
        raise ProtocolError(machine.state.value, "step_ws", machine.protocol.value)
    actions = []
    for event in events:
        machine, out = _ws_one(machine, event, t)
        actions += out
    return machine, actions


def step(machine: HoMachine, events: Iterable, t: int) -> tuple[HoMachine, list]:
    if machine.protocol is Protocol.SA:
        return step_sa(machine, events, t)
    return step_ws(machine, events, t)

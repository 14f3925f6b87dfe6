"""
Discrete-time (1 ms) simulation of one scenario under one handover protocol.

Ticks 0..79 run initial beam search; from tick 80 every tick first advances the protocol
machines (measurement-report instants, due timers, radio link failure) and then moves one
data block per UE over its active links. Every PHY value the run consumes is written to
the trace, so replaying the trace reproduces the metrics.
"""
from __future__ import annotations

import logging
import math

import numpy as np
import pandas as pd

from models.channel import PathKind, reflected_snr_db, ue_terms
from models.codebook import Codebook, CodebookKey, CodebookMode
from models.errors import DomainError
from models.handover.attachment import best_of_cube, neighbor_scan, select_serving
from models.handover.daps import DapsBuffer, daps_deliver, daps_expire, daps_flush
from models.handover.state_machine import (Attach, Complete, ContextTransfer, Degrade, HandoverCommand,
                                           HandoverRequest, HoMachine, HoState, Interrupt, LinkLost,
                                           MbbCheck, MeasureReflect, MeasureSlot, MrTimer, Protocol,
                                           RachDone, Reattach, ReflectReport, ReflectSample, Revert,
                                           ScanReport, Settled, SlotReport, StartDuplication,
                                           StopDuplication, UeMeasurement, XnAck, new_machine, step,
                                           tracked_key)
from models.sim.goodput import per_model
from models.sim.metrics import TRACE_COLUMNS, Metrics, delta_table, metrics_from_trace
from models.sim.phy import PhyQuery, PhySource, SyntheticPhy, TracePhy
from models.sim.planning import (attach_angles, geometry_at, resolve_codebook, scan_plan, target_theta,
                                 tracked_theta)
from models.sim.scenario import DATA_START_MS, Scenario
from models.surface_model import DEFAULT_ATOM_MODEL, AtomModel

logger = logging.getLogger(__name__)

_NAN = math.nan


class _UeState:
    def __init__(self, ue_id: int):
        self.ue_id = ue_id
        self.seq = 0
        self.sent_at: dict[int, int] = {}
        self.blackouts: list[tuple[int, int, str]] = []
        self.degrades: list[tuple[int, int, float]] = []
        self.buffer: DapsBuffer | None = None
        self.outage_run = 0

    def blackout(self, t: int) -> str | None:
        tag = None
        for start, end, name in self.blackouts:
            if start <= t < end:
                tag = name
        return tag

    def degrade(self, t: int) -> float:
        factor = 1.0
        for start, end, f in self.degrades:
            if start <= t < end:
                factor = min(factor, f)
        return factor


def scenario_model(scenario: Scenario, model: AtomModel = DEFAULT_ATOM_MODEL) -> AtomModel:
    """The measured atom grid named by the scenario, unless a model is passed explicitly."""
    if model is DEFAULT_ATOM_MODEL and scenario.surface.atom_grid:
        from data.atom_grid import load_atom_grid
        return load_atom_grid(scenario.surface.atom_grid)
    return model


def _key_cols(key: CodebookKey | None) -> tuple[float, float, float]:
    if key is None:
        return _NAN, _NAN, _NAN
    return key.theta_t, key.theta_r, key.alpha


def _tag(name: str, factor: float) -> str:
    return name if factor == 1.0 else f"{name}*{factor!r}"


class SimEngine:
    def __init__(self, scenario: Scenario, codebook: Codebook | None = None, phy: PhySource | None = None,
                 model: AtomModel = DEFAULT_ATOM_MODEL):
        self.sc = scenario
        self.ho = scenario.ho_params()
        self.ws = scenario.protocol.protocol is Protocol.WS
        self.budget = scenario.link.budget
        geo = scenario.geometry
        self.ue_ids = tuple(sorted(u.ue_id for u in geo.ues))
        self.gnb_ids = tuple(sorted(g.gnb_id for g in geo.gnbs))
        period = scenario.timing.ssb_period_ms
        if max(u.n_beams for u in geo.ues) * period > DATA_START_MS:
            raise DomainError(f"UE beam sweep does not fit in the {DATA_START_MS} ms attachment phase")

        model = scenario_model(scenario, model)
        self.codebook = resolve_codebook(scenario, model, codebook) if self.ws else codebook
        if phy is None:
            if scenario.replay.mode == "trace-replay":
                from data.trace_io import read_trace
                rp = scenario.replay
                phy = TracePhy(read_trace(rp.trace), rp.calibration_db if rp.calibrate else 0.0)
            else:
                phy = SyntheticPhy(scenario, self.codebook, model)
        self.phy = phy

        self.rows: list[tuple] = []
        self.ues = {u: _UeState(u) for u in self.ue_ids}
        self.machines: list[HoMachine] = []
        self.mr = set(scenario.mr_instants())
        self.reflect: MeasureReflect | None = None
        self.slot: MeasureSlot | None = None
        self.last_key: CodebookKey | None = None
        self.geo = geometry_at(scenario, 0)

    # ─── Rows and PHY ───────────────────────────────────────────────────────────

    def _row(self, t, ue, gnb, path, event, key=None, rsrp=_NAN, sinr=_NAN, per=_NAN, gnb_beam=_NAN):
        path = "" if path is None else PathKind(path).value
        self.rows.append((int(t), int(ue), int(gnb), path, float(gnb_beam), *_key_cols(key),
                          float(rsrp), float(sinr), float(per), event))

    def _sinr(self, value: float, path: PathKind, serving: int | None = None) -> float:
        if not math.isfinite(value):
            return value
        if path is PathKind.REFLECTIVE:
            return reflected_snr_db(value, self.geo, self.budget, serving)
        return value - self.budget.p_nf

    def _measure(self, kind: str, t: int, ue: int, gnb: int, path: PathKind, key: CodebookKey | None = None,
                 gnb_beam: int | None = None, ue_beam: int | None = None, serving: int | None = None) -> float:
        q = PhyQuery(kind, t, ue, gnb, path, key, gnb_beam, ue_beam, serving)
        value = self.phy.query(self.geo, q)
        event = "meas-attach" if kind == "attach" else "meas"
        self._row(t, ue, gnb, path, event, key, value, self._sinr(value, path, serving),
                  gnb_beam=_NAN if gnb_beam is None else gnb_beam)
        return value

    def _usable(self, sinr: float) -> bool:
        return math.isfinite(sinr) and sinr >= self.sc.link.outage_sinr_db

    # ─── Attachment ─────────────────────────────────────────────────────────────

    def _attach_phase(self) -> None:
        sc, geo0 = self.sc, geometry_at(self.sc, 0)
        path = PathKind.TRANSMISSIVE if self.ws else PathKind.DIRECT
        angles = {g: attach_angles(geo0, g) if self.ws else (None,) for g in self.gnb_ids}
        cubes = {g: {u: np.full((geo0.gnb(g).n_beams, len(angles[g]), geo0.ue(u).n_beams), -np.inf)
                     for u in self.ue_ids} for g in self.gnb_ids}
        period = sc.timing.ssb_period_ms
        for t in range(DATA_START_MS):
            self.geo = geometry_at(sc, t)
            if t % period == 0:
                beam = t // period
                for g in self.gnb_ids:
                    for u in self.ue_ids:
                        cube = cubes[g][u]
                        if beam >= cube.shape[2]:
                            continue
                        for b in range(cube.shape[0]):
                            for s, angle in enumerate(angles[g]):
                                key = None if angle is None else tracked_key(angle)
                                cube[b, s, beam] = self._measure("attach", t, u, g, path, key, b, beam)
            for u in self.ue_ids:
                self._row(t, u, -1, None, "idle")
        self.geo = geometry_at(sc, DATA_START_MS)
        self._select(cubes, angles)

    def _select(self, cubes, angles) -> None:
        t = DATA_START_MS
        if self.ws:
            sel = select_serving(cubes)
            if sel is None:
                logger.warning("no gNB reachable through the surface; starting in outage")
                self.machines = [HoMachine(Protocol.WS, -1, self.ue_ids, self.ho, state=HoState.OUTAGE)]
                return
            theta = angles[sel.gnb_id][sel.surface_index]
            self.machines = [new_machine(Protocol.WS, sel.gnb_id, self.ue_ids, self.ho, theta)]
            self.last_key = tracked_key(theta)
            self._row(t, -1, sel.gnb_id, PathKind.TRANSMISSIVE, "attach", tracked_key(theta), sel.rsrp,
                      self._sinr(sel.rsrp, PathKind.TRANSMISSIVE), gnb_beam=sel.gnb_beam)
            logger.info("attached vehicle to gNB %d at %.0f deg (worst UE %.1f dBm)", sel.gnb_id, theta, sel.rsrp)
            return
        for u in self.ue_ids:
            best = None
            for g in self.gnb_ids:
                att = best_of_cube(cubes[g][u], self.sc.timing.ssb_period_ms)
                if not att.failed and (best is None or att.rsrp > best[1].rsrp):
                    best = (g, att)
            if best is None:
                logger.warning("UE %d found no gNB; starting in outage", u)
                self.machines.append(HoMachine(Protocol.SA, -1, (u,), self.ho, state=HoState.OUTAGE))
                continue
            g, att = best
            self.machines.append(new_machine(Protocol.SA, g, (u,), self.ho))
            self._row(t, u, g, PathKind.DIRECT, "attach", None, att.rsrp,
                      self._sinr(att.rsrp, PathKind.DIRECT), gnb_beam=att.best[0])

    # ─── Protocol driving ───────────────────────────────────────────────────────

    def _step(self, i: int, event, t: int) -> None:
        machine, actions = step(self.machines[i], [event], t)
        self.machines[i] = machine
        self._apply(machine, actions, t)

    def _drive(self, i: int, t: int) -> None:
        m = self.machines[i]
        if m.state is not HoState.OUTAGE and all(
                self.ues[u].outage_run >= self.sc.protocol.rlf_ms for u in m.ue_ids):
            logger.info("radio link failure for UE %s at %d ms", m.ue_ids, t)
            self._step(i, LinkLost(t), t)
        if t in self.mr:
            m = self.machines[i]
            if m.state is HoState.OUTAGE:
                event = self._reattach_event(m, t)
                if event is not None:
                    self._step(i, event, t)
            elif self.ws:
                theta = tracked_theta(self.geo, m.serving)
                plan = scan_plan(self.geo, m.serving) if theta is not None else ()
                self._step(i, MrTimer(t, theta, plan), t)
            else:
                self._step(i, MrTimer(t), t)
        while due := self.machines[i].due(t):
            self._step(i, self._timer_event(self.machines[i], due[0], t), t)

    def _timer_event(self, m: HoMachine, name: str, t: int):
        if name == "scan_done":
            reports = []
            for u in m.ue_ids:
                values = {g: self._measure("meas", t, u, g, PathKind.DIRECT) for g in self.gnb_ids}
                neighbors = tuple((g, v) for g, v in values.items() if g != m.serving)
                reports.append(UeMeasurement(u, values.get(m.serving, -math.inf), neighbors))
            return ScanReport(t, tuple(reports))
        if name == "slot1_done":
            r, samples = self.reflect, []
            for n, angles in r.scan_plan:
                measured = neighbor_scan(
                    r.theta_t, self.codebook,
                    lambda theta_r, e, n=n: self._measure("meas", t, -1, n, PathKind.REFLECTIVE, e.key,
                                                          serving=m.serving),
                    angles, r.alpha)
                for theta_r, m_r in measured:
                    entry = self.codebook.lookup(
                        CodebookKey(r.theta_t, theta_r, r.alpha, CodebookMode.DUAL_TRANSFLECTIVE))
                    samples.append(ReflectSample(n, theta_r, m_r, entry.g_w_ref))
            return ReflectReport(t, tuple(samples))
        if name == "slot2_done":
            s = self.slot
            key = CodebookKey(s.theta_t, s.theta_r, s.alpha, CodebookMode.DUAL_TRANSFLECTIVE)
            entry = self.codebook.lookup(key)
            m_s = tuple(self._measure("meas", t, u, m.serving, PathKind.TRANSMISSIVE, key) for u in m.ue_ids)
            g_ue = tuple(ue_terms(self.geo, u)[0] for u in m.ue_ids)
            return SlotReport(t, m_s, entry.g_w_tra, g_ue)
        if name == "xn_ack":
            return XnAck(t, target_theta(self.geo, m.target, m.theta_t))
        if name == "mbb_check":
            key = m.surface_key
            m_n = tuple(self._measure("meas", t, u, m.target, PathKind.TRANSMISSIVE, key) for u in m.ue_ids)
            m_s = tuple(self._measure("meas", t, u, m.serving, PathKind.TRANSMISSIVE, key) for u in m.ue_ids)
            return MbbCheck(t, m_n, m_s)
        if name == "rach_done":
            return RachDone(t)
        if name == "settle":
            return Settled(t)
        raise DomainError(f"unknown protocol timer '{name}'")

    def _reattach_event(self, m: HoMachine, t: int) -> Reattach | None:
        best = None
        for g in self.gnb_ids:
            if self.ws:
                theta = tracked_theta(self.geo, g)
                if theta is None:
                    continue
                key = tracked_key(theta)
                value = min(self._measure("meas", t, u, g, PathKind.TRANSMISSIVE, key) for u in m.ue_ids)
                sinr = self._sinr(value, PathKind.TRANSMISSIVE)
            else:
                theta = None
                value = self._measure("meas", t, m.ue_ids[0], g, PathKind.DIRECT)
                sinr = self._sinr(value, PathKind.DIRECT)
            if self._usable(sinr) and (best is None or value > best[0]):
                best = (value, g, theta)
        if best is None:
            return None
        logger.info("UE %s re-attaching to gNB %d at %d ms", m.ue_ids, best[1], t)
        return Reattach(t, best[1], best[2])

    def _apply(self, m: HoMachine, actions: list, t: int) -> None:
        entity = -1 if self.ws else m.ue_ids[0]
        for a in actions:
            if isinstance(a, Interrupt):
                for u in a.ue_ids:
                    self.ues[u].blackouts.append((a.start, a.start + a.duration, a.tag))
            elif isinstance(a, Degrade):
                for u in a.ue_ids:
                    self.ues[u].degrades.append((a.start, a.start + a.duration, a.factor))
            elif isinstance(a, MeasureReflect):
                self.reflect = a
            elif isinstance(a, MeasureSlot):
                self.slot = a
            elif isinstance(a, (HandoverRequest, HandoverCommand)):
                self._row(t, entity, a.target, None, a.tag)
            elif isinstance(a, ContextTransfer):
                self._row(t, a.ue_id, a.target, None, a.tag)
            elif isinstance(a, StartDuplication):
                for u in m.ue_ids:
                    buf = DapsBuffer(window_ms=self.sc.protocol.reorder_window_ms)
                    buf.watermark = self.ues[u].seq - 1
                    self.ues[u].buffer = buf
            elif isinstance(a, StopDuplication):
                for u in m.ue_ids:
                    st = self.ues[u]
                    if st.buffer is not None:
                        self._releases(st, daps_flush(st.buffer), t)
                        st.buffer = None
            elif isinstance(a, Complete):
                self._row(t, entity, a.target, None, a.tag)
            elif isinstance(a, Revert):
                self._row(t, entity, a.serving, None, a.tag)
            elif isinstance(a, Attach):
                self._row(t, entity, a.gnb_id, None, a.tag)
                for u in m.ue_ids:
                    self.ues[u].outage_run = 0

    # ─── Data plane ─────────────────────────────────────────────────────────────

    def _surface_tick(self, t: int) -> tuple[CodebookKey | None, int]:
        """Surface key carrying data at `t`, and how many reconfigurations the tick saw."""
        m = self.machines[0]
        if m.state is HoState.OUTAGE or m.surface_key is None:
            return None, 0
        if m.state is HoState.SCANNING and self.reflect is not None:
            r, burst = self.reflect, self.sc.timing.ssb_burst_ms
            applied = []
            for k, (_, angles) in enumerate(r.scan_plan):
                for j, a in enumerate(angles):
                    start = r.start + burst * k + j * burst / len(angles)
                    if t <= start < t + 1:
                        applied.append(CodebookKey(r.theta_t, a, r.alpha, CodebookMode.DUAL_TRANSFLECTIVE))
        elif m.state is HoState.PREPARING and self.slot is not None:
            s = self.slot
            applied = [CodebookKey(s.theta_t, s.theta_r, s.alpha, CodebookMode.DUAL_TRANSFLECTIVE)]
        else:
            applied = [m.surface_key]
        switches = 0
        for key in applied:
            if key != self.last_key:
                switches += 1
                self.last_key = key
        return self.last_key, switches

    def _links(self, u: int, data_key: CodebookKey | None) -> list[tuple[int, PathKind, CodebookKey | None]]:
        if self.ws:
            m = self.machines[0]
            if m.state is HoState.OUTAGE or data_key is None:
                return []
            links = [(m.serving, PathKind.TRANSMISSIVE, data_key)]
            if m.state is HoState.EXECUTING_MBB:
                links.append((m.target, PathKind.TRANSMISSIVE, data_key))
            return links
        m = next(x for x in self.machines if u in x.ue_ids)
        if m.state is HoState.OUTAGE:
            return []
        return [(m.serving, PathKind.DIRECT, None)]

    def _lost(self, u: int, gnb: int, seq: int, per: float) -> bool:
        rng = np.random.default_rng([self.sc.seed, u, gnb, seq])
        return bool(rng.random() < per)

    def _releases(self, st: _UeState, released: list[int], t: int, skip: int | None = None) -> None:
        for seq in released:
            if seq != skip:
                self._row(t, st.ue_id, -1, None, f"release@{st.sent_at[seq]}")

    def _data(self, t: int, data_key: CodebookKey | None, switches: int) -> None:
        link = self.sc.link
        reconfig = max(0.0, 1.0 - self.sc.timing.reconfig_ms * switches)
        for u in self.ue_ids:
            st = self.ues[u]
            links = self._links(u, data_key)
            if not links:
                self._row(t, u, -1, None, "outage")
                st.outage_run += 1
                continue
            measured = []
            for g, path, key in links:
                value = self.phy.query(self.geo, PhyQuery("link", t, u, g, path, key))
                sinr = self._sinr(value, path)
                measured.append((g, path, key, value, sinr, per_model(sinr, link.per_mid_db, link.per_slope_db)))
            usable = [self._usable(x[4]) for x in measured]
            st.outage_run = 0 if any(usable) else st.outage_run + 1

            blackout = st.blackout(t)
            if blackout is not None or not any(usable):
                name = blackout or "outage"
                for g, path, key, value, sinr, per in measured:
                    self._row(t, u, g, path, name, key, value, sinr, per)
                continue

            factor = st.degrade(t) * reconfig
            seq = st.seq
            st.seq += 1
            st.sent_at[seq] = t
            for (g, path, key, value, sinr, per), ok in zip(measured, usable):
                if not ok or self._lost(u, g, seq, per):
                    name = "loss"
                elif st.buffer is None:
                    name = "deliver"
                else:
                    dups = st.buffer.duplicates
                    released = daps_deliver(st.buffer, g, seq, t)
                    if st.buffer.duplicates > dups:
                        name = "dup"
                    elif seq in released:
                        name = "deliver"
                    else:
                        name = "hold"
                    self._row(t, u, g, path, _tag(name, factor), key, value, sinr, per)
                    self._releases(st, released, t, skip=seq)
                    continue
                self._row(t, u, g, path, _tag(name, factor), key, value, sinr, per)

    # ─── Run ────────────────────────────────────────────────────────────────────

    def run(self) -> tuple[Metrics, pd.DataFrame]:
        sc = self.sc
        logger.info("running '%s' with %s for %d ms", sc.name, sc.protocol.protocol.value, sc.duration_ms)
        self._attach_phase()
        for t in range(DATA_START_MS, sc.duration_ms):
            self.geo = geometry_at(sc, t)
            for i in range(len(self.machines)):
                self._drive(i, t)
            data_key, switches = self._surface_tick(t) if self.ws else (None, 0)
            self._data(t, data_key, switches)
            for st in self.ues.values():
                if st.buffer is not None:
                    self._releases(st, daps_expire(st.buffer, t), t)

        trace = pd.DataFrame(self.rows, columns=TRACE_COLUMNS)
        metrics = metrics_from_trace(trace, sc.link, sc.duration_ms, sc.output.window_ms,
                                     sc.protocol.ping_pong_ms, DATA_START_MS)
        logger.info("'%s' %s done: %d handovers, %d ms outage", sc.name, sc.protocol.protocol.value,
                    metrics.summary["ho_count"], metrics.summary["outage_ms"])
        return metrics, trace


def run(scenario: Scenario, codebook: Codebook | None = None, phy: PhySource | None = None,
        model: AtomModel = DEFAULT_ATOM_MODEL) -> tuple[Metrics, pd.DataFrame]:
    """Simulate `scenario`; returns the metrics and the full trace."""
    return SimEngine(scenario, codebook, phy, model).run()


def compare(scenario: Scenario, protocols, codebook: Codebook | None = None,
            model: AtomModel = DEFAULT_ATOM_MODEL) -> tuple[dict[str, Metrics], pd.DataFrame]:
    """
    Run the same scenario under each protocol; one surface-assisted codebook is resolved
    once and shared by every arm.
    """
    protocols = [Protocol(p) for p in protocols]
    model = scenario_model(scenario, model)
    if Protocol.WS in protocols:
        codebook = resolve_codebook(scenario.with_protocol(Protocol.WS), model, codebook)
    arms, seen = [], {}
    for p in protocols:
        seen[p.value] = seen.get(p.value, 0) + 1
        label = p.value if seen[p.value] == 1 else f"{p.value}#{seen[p.value]}"
        metrics, _ = run(scenario.with_protocol(p), codebook, model=model)
        arms.append((label, metrics))
    return dict(arms), delta_table(arms)

"""
Steering angles the engine asks for, and the codebook keys a surface-assisted run can
need. The trajectory is deterministic, so the plan is known before the first tick.
"""
import logging
import math

import numpy as np

from models.channel import NodeGeometry, incident_angle, ue_angle
from models.codebook import (Codebook, CodebookKey, CodebookMode, build_codebook_for_keys, key_grid,
                             load_codebook, snap_angle)
from models.errors import ConfigError
from models.handover.state_machine import tracked_key
from models.sim.mobility import mobility_step
from models.sim.scenario import Scenario
from models.surface_model import ANGLE_LIMIT_DEG, DEFAULT_ATOM_MODEL, AtomModel

logger = logging.getLogger(__name__)

N_SCAN_ANGLES = 8

_SIN_LIMIT = math.sin(math.radians(ANGLE_LIMIT_DEG))


def steering_key_angle(out_angle: float, incident: float) -> float:
    """Codebook angle (normal incidence) with the phase gradient of (out_angle, incident)."""
    s = math.sin(math.radians(out_angle)) + math.sin(math.radians(incident))
    s = min(max(s, -_SIN_LIMIT), _SIN_LIMIT)
    return snap_angle(math.degrees(math.asin(s)))


def tracked_theta(geometry: NodeGeometry, gnb_id: int) -> float | None:
    inc = incident_angle(geometry, gnb_id)
    outs = [a for a in (ue_angle(geometry, u.ue_id) for u in geometry.ues) if a is not None]
    if inc is None or not outs:
        return None
    return steering_key_angle(float(np.mean(outs)), inc)


def target_theta(geometry: NodeGeometry, gnb_id: int, fallback: float) -> float:
    """Tracked angle towards a handover target, or `fallback` when the target is behind the surface."""
    theta = tracked_theta(geometry, gnb_id)
    return fallback if theta is None else theta


def reflect_center(geometry: NodeGeometry, serving: int, neighbor: int) -> float | None:
    inc_s, inc_n = incident_angle(geometry, serving), incident_angle(geometry, neighbor)
    if inc_s is None or inc_n is None:
        return None
    return steering_key_angle(inc_s, inc_n)


def scan_plan(geometry: NodeGeometry, serving: int) -> tuple[tuple[int, tuple[float, ...]], ...]:
    plan = []
    for g in geometry.gnbs:
        if g.gnb_id == serving:
            continue
        center = reflect_center(geometry, serving, g.gnb_id)
        if center is not None:
            plan.append((g.gnb_id, tuple(key_grid(center, N_SCAN_ANGLES))))
    return tuple(plan)


def attach_angles(geometry: NodeGeometry, gnb_id: int) -> tuple[float, ...]:
    center = tracked_theta(geometry, gnb_id)
    return tuple(key_grid(0.0 if center is None else center, N_SCAN_ANGLES))


def geometry_at(scenario: Scenario, t_ms: int) -> NodeGeometry:
    return scenario.geometry.with_pose(mobility_step(scenario.trajectory, t_ms))


def plan_codebook_keys(scenario: Scenario) -> list[CodebookKey]:
    ho = scenario.ho_params()
    keys = set()
    geo0 = geometry_at(scenario, 0)
    for g in scenario.geometry.gnbs:
        keys.update(tracked_key(a) for a in attach_angles(geo0, g.gnb_id))

    for t in scenario.mr_instants():
        geo = geometry_at(scenario, t)
        for s in scenario.geometry.gnbs:
            theta = tracked_theta(geo, s.gnb_id)
            if theta is None:
                continue
            keys.add(tracked_key(theta))
            plan = scan_plan(geo, s.gnb_id)
            for _, angles in plan:
                for a in angles:
                    keys.add(CodebookKey(theta, a, ho.alpha_scan, CodebookMode.DUAL_TRANSFLECTIVE))
                    keys.add(CodebookKey(theta, a, ho.alpha_slot2, CodebookMode.DUAL_TRANSFLECTIVE))
            t_xn = t + ho.burst_ms * (len(plan) + 1) + ho.xn_ms
            if not plan or t_xn >= scenario.duration_ms:
                continue
            geo_xn = geometry_at(scenario, t_xn)
            for n, _ in plan:
                target = target_theta(geo_xn, n, theta)
                keys.add(CodebookKey(theta, target, ho.alpha_mbb, CodebookMode.DUAL_TRANSMISSIVE))
                keys.add(tracked_key(target))
    return sorted(keys)


def resolve_codebook(scenario: Scenario, model: AtomModel = DEFAULT_ATOM_MODEL,
                     codebook: Codebook | None = None) -> Codebook:
    """
    Codebook covering the whole plan: the one given, the scenario's codebook file, or a
    fresh synthesis with the scenario's GA settings.
    """
    keys = plan_codebook_keys(scenario)
    source = "given codebook"
    if codebook is None and scenario.surface.codebook:
        source = scenario.surface.codebook
        codebook = load_codebook(scenario.surface.codebook, scenario.surface.geometry)
    if codebook is None:
        logger.info("synthesizing %d planned codebook entries for '%s'", len(keys), scenario.name)
        return build_codebook_for_keys(keys, scenario.surface.geometry, scenario.surface.seed,
                                       settings=scenario.surface.ga, model=model)
    if codebook.geometry != scenario.surface.geometry:
        raise ConfigError(f"{source} was built for a different surface geometry", "surface.codebook")
    for key in keys:
        if key not in codebook:
            raise ConfigError(f"{source} has no entry for planned key {key.label}", "surface.codebook")
    return codebook

"""
Geometry, path loss, blockage and the RSRP values every protocol decision is made from.

All quantities are in dB/dBm and every loss enters as a negative contribution. The
vehicle frame has x pointing forward and y to the left; poses rotate it into the world.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Iterable

import numpy as np
import pandas as pd

from models.errors import DomainError
from models.surface_model import (DEFAULT_ATOM_MODEL, AtomModel, Side, SurfaceConfig,
                                  SurfaceGeometry, SurfaceMode, gain_at)
from utils.db_math import SPEED_OF_LIGHT, wrap_deg

logger = logging.getLogger(__name__)

OUTAGE = -math.inf

BEAM_LOSS_SLOPE_DB = 12.0
BEAM_LOSS_CAP_DB = 20.0


class PathKind(str, Enum):
    DIRECT = "direct"
    TRANSMISSIVE = "via-surface-transmissive"
    REFLECTIVE = "via-surface-reflective"


PATH_CODES = {PathKind.DIRECT: 0, PathKind.TRANSMISSIVE: 1, PathKind.REFLECTIVE: 2}


# ─── Link budget ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LinkBudgetParams:
    """
    Link-budget constants. The SNR calculators use every field; the channel takes
    l_window, g_ris_rx, g_ris_tx and p_nf from here and the rest from the sites and the
    actual distances.
    """
    p_gnb: float = 60.0
    l_gnb: float = 103.0
    l_gnb_s: float = 103.0
    l_window: float = 3.0
    g_ris_rx: float = 24.0
    g_ris_tx: float = 24.0
    l_ue: float = 72.0
    g_ue: float = 8.0
    g_gnb_s: float = 29.5
    p_nf: float = -89.0

    def __post_init__(self):
        for name in ("l_gnb", "l_gnb_s", "l_window", "l_ue"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} is a loss and must be >= 0 dB")


def fspl(d: float, f_ghz: float) -> float:
    """Free-space path loss 20·log10(4π·d·f/c) in dB."""
    if not d > 0:
        raise DomainError(f"distance must be positive, got {d}")
    if not f_ghz > 0:
        raise DomainError(f"frequency must be positive, got {f_ghz}")
    return 20.0 * math.log10(4.0 * math.pi * d * f_ghz * 1e9 / SPEED_OF_LIGHT)


def link_budget_terms(params: LinkBudgetParams, which: str = "ue") -> list[tuple[str, float]]:
    """Signed terms whose sum is the downlink UE SNR (`ue`) or the reflected gNB SNR (`gnb`)."""
    p = params
    if which == "ue":
        return [("P_gNB", p.p_gnb), ("-L_gNB", -p.l_gnb), ("-L_window", -p.l_window),
                ("G_RIS,Rx", p.g_ris_rx), ("G_RIS,Tx", p.g_ris_tx), ("-L_UE", -p.l_ue),
                ("G_UE", p.g_ue), ("-P_nf", -p.p_nf)]
    if which == "gnb":
        return [("P_gNB_n", p.p_gnb), ("-L_gNB_n", -p.l_gnb), ("-L_window", -p.l_window),
                ("G_RIS,Rx", p.g_ris_rx), ("G_RIS,Tx", p.g_ris_tx), ("-L_window", -p.l_window),
                ("-L_gNB_s", -p.l_gnb_s), ("G_gNB_s", p.g_gnb_s), ("-P_nf", -p.p_nf)]
    raise DomainError(f"unknown link budget '{which}', expected 'ue' or 'gnb'")


def snr_ue(params: LinkBudgetParams) -> float:
    return math.fsum(v for _, v in link_budget_terms(params, "ue"))


def snr_gnb(params: LinkBudgetParams) -> float:
    return math.fsum(v for _, v in link_budget_terms(params, "gnb"))


def loss_bounds(d_min: float, d_max: float, f_ghz: float) -> tuple[float, float]:
    """(l_min, l_max) bounds on the signed in-vehicle loss L_ue for distances in [d_min, d_max]."""
    if not 0 < d_min <= d_max:
        raise DomainError(f"need 0 < d_min <= d_max, got [{d_min}, {d_max}]")
    return -fspl(d_max, f_ghz), -fspl(d_min, f_ghz)


# ─── Sites and geometry ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0


@dataclass(frozen=True)
class GnbSite:
    gnb_id: int
    position: tuple[float, float]
    carrier_ghz: float = 26.0
    eirp_dbm: float = 60.0
    g_rx_dbi: float = 29.5
    boresight: float = -90.0
    n_beams: int = 8
    beamwidth: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if self.gnb_id < 0:
            raise DomainError(f"gNB id must be >= 0, got {self.gnb_id}")
        if self.n_beams < 1 or self.beamwidth <= 0:
            raise DomainError(f"gNB {self.gnb_id}: needs >= 1 beam and a positive beamwidth")

    def beam_centers(self) -> np.ndarray:
        k = np.arange(self.n_beams) - (self.n_beams - 1) / 2.0
        return self.boresight + k * self.beamwidth


@dataclass(frozen=True)
class UeSite:
    ue_id: int
    offset: tuple[float, float]
    zone: str | None = None
    g_ue_dbi: float = 8.0
    n_beams: int = 4
    beamwidth: float = 90.0

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))
        if self.ue_id < 0:
            raise DomainError(f"UE id must be >= 0, got {self.ue_id}")

    def beam_centers(self, heading: float) -> np.ndarray:
        return heading + self.beamwidth * np.arange(self.n_beams)


@dataclass(frozen=True)
class Zone:
    """Body attenuation on the direct path; None means the zone sees no direct signal."""
    name: str
    attenuation_db: float | None
    box: tuple[float, float, float, float] | None = None  # x_min, x_max, y_min, y_max

    def __post_init__(self):
        if self.attenuation_db is not None and self.attenuation_db < 0:
            raise DomainError(f"zone '{self.name}': attenuation must be >= 0 dB")
        if self.box is not None:
            object.__setattr__(self, "box", tuple(float(v) for v in self.box))

    @property
    def blocked(self) -> bool:
        return self.attenuation_db is None

    def contains(self, x: float, y: float) -> bool:
        if self.box is None:
            return False
        x0, x1, y0, y1 = self.box
        return x0 <= x <= x1 and y0 <= y <= y1


@dataclass(frozen=True)
class SurfaceMount:
    offset: tuple[float, float] = (-1.5, 0.9)
    normal: float = 90.0  # outward normal in the vehicle frame

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))


@dataclass(frozen=True)
class NodeGeometry:
    gnbs: tuple[GnbSite, ...]
    ues: tuple[UeSite, ...]
    pose: Pose = Pose()
    mount: SurfaceMount = SurfaceMount()
    zones: tuple[Zone, ...] = ()
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8
    surface: SurfaceGeometry = SurfaceGeometry(n_elements=8)

    def __post_init__(self):
        object.__setattr__(self, "gnbs", tuple(self.gnbs))
        object.__setattr__(self, "ues", tuple(self.ues))
        object.__setattr__(self, "zones", tuple(self.zones))
        if not self.gnbs:
            raise DomainError("geometry needs at least one gNB")
        if len({g.gnb_id for g in self.gnbs}) != len(self.gnbs):
            raise DomainError("gNB ids must be unique")
        if len({u.ue_id for u in self.ues}) != len(self.ues):
            raise DomainError("UE ids must be unique")
        names = {z.name for z in self.zones}
        half_l, half_w = self.vehicle_length / 2.0, self.vehicle_width / 2.0
        for ue in self.ues:
            if abs(ue.offset[0]) > half_l or abs(ue.offset[1]) > half_w:
                raise DomainError(f"UE {ue.ue_id} offset {ue.offset} lies outside the vehicle")
            if ue.zone is not None and ue.zone not in names:
                raise DomainError(f"UE {ue.ue_id} refers to unknown zone '{ue.zone}'")

    def gnb(self, gnb_id: int) -> GnbSite:
        for g in self.gnbs:
            if g.gnb_id == gnb_id:
                return g
        raise DomainError(f"unknown gNB id {gnb_id}")

    def ue(self, ue_id: int) -> UeSite:
        for u in self.ues:
            if u.ue_id == ue_id:
                return u
        raise DomainError(f"unknown UE id {ue_id}")

    def zone(self, name: str | None) -> Zone | None:
        for z in self.zones:
            if z.name == name:
                return z
        return None

    def with_pose(self, pose: Pose) -> "NodeGeometry":
        return replace(self, pose=pose)


def _to_world(pose: Pose, offset) -> np.ndarray:
    h = math.radians(pose.heading)
    x, y = offset
    return np.array([pose.x + x * math.cos(h) - y * math.sin(h),
                     pose.y + x * math.sin(h) + y * math.cos(h)])


def _bearing(src, dst) -> float:
    return math.degrees(math.atan2(dst[1] - src[1], dst[0] - src[0]))


def beam_loss(error_deg: float, beamwidth: float) -> float:
    return min(BEAM_LOSS_SLOPE_DB * (error_deg / beamwidth) ** 2, BEAM_LOSS_CAP_DB)


def _pick_beam(centers: np.ndarray, bearing: float, beamwidth: float, beam: int | None):
    errors = np.abs(wrap_deg(bearing - centers))
    idx = int(np.argmin(errors)) if beam is None else int(beam)
    if not 0 <= idx < centers.size:
        raise DomainError(f"beam index {idx} outside 0..{centers.size - 1}")
    return idx, beam_loss(float(errors[idx]), beamwidth)


@dataclass(frozen=True)
class Snapshot:
    """Positions, distances and angles for one pose."""
    surface_xy: tuple[float, float]
    normal: float
    incident: dict[int, float | None]
    gnb_surface_dist: dict[int, float]
    ue_xy: dict[int, tuple[float, float]]
    ue_out_angle: dict[int, float | None]
    ue_surface_dist: dict[int, float]


@lru_cache(maxsize=4096)
def snapshot(geometry: NodeGeometry) -> Snapshot:
    pose = geometry.pose
    surf = _to_world(pose, geometry.mount.offset)
    normal = pose.heading + geometry.mount.normal
    incident, dist = {}, {}
    for g in geometry.gnbs:
        ang = float(wrap_deg(_bearing(surf, g.position) - normal))
        incident[g.gnb_id] = ang if abs(ang) < 90.0 else None
        dist[g.gnb_id] = float(np.hypot(*(np.asarray(g.position) - surf)))
    ue_xy, out, ue_dist = {}, {}, {}
    for u in geometry.ues:
        p = _to_world(pose, u.offset)
        ue_xy[u.ue_id] = (float(p[0]), float(p[1]))
        # transmissive output angle: negative CCW angle from the inward normal
        ang = float(wrap_deg(_bearing(surf, p) - (normal + 180.0)))
        out[u.ue_id] = -ang + 0.0 if abs(ang) < 90.0 else None
        ue_dist[u.ue_id] = float(np.hypot(*(p - surf)))
    return Snapshot((float(surf[0]), float(surf[1])), normal, incident, dist, ue_xy, out, ue_dist)


def incident_angle(geometry: NodeGeometry, gnb_id: int) -> float | None:
    """
    Signed angle of the gNB seen from the surface, CCW from the outward normal, in (−90°, 90°).

    None when the gNB is behind the surface plane.
    """
    geometry.gnb(gnb_id)
    return snapshot(geometry).incident[gnb_id]


def ue_angle(geometry: NodeGeometry, ue_id: int) -> float | None:
    geometry.ue(ue_id)
    return snapshot(geometry).ue_out_angle[ue_id]


# ─── Path values ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BeamIds:
    gnb_beam: int | None = None
    surf_t: float | None = None
    surf_r: float | None = None
    ue_beam: int | None = None


@dataclass(frozen=True)
class RsrpSample:
    t: int
    source_gnb: int
    path: PathKind
    value: float
    beam_ids: BeamIds = BeamIds()
    ue_id: int | None = None

    @property
    def outage(self) -> bool:
        return not math.isfinite(self.value)


def gnb_beam(geometry: NodeGeometry, gnb_id: int, target_xy, beam: int | None = None) -> tuple[int, float]:
    """(beam index, beam loss) of a gNB towards a point; tracked unless a beam is fixed."""
    g = geometry.gnb(gnb_id)
    return _pick_beam(g.beam_centers(), _bearing(g.position, target_xy), g.beamwidth, beam)


def link_aggregate(geometry: NodeGeometry, budget: LinkBudgetParams, gnb_id: int,
                   beam: int | None = None) -> float:
    """X_g: everything between a gNB and the surface, aperture gains included."""
    snap = snapshot(geometry)
    if snap.incident[geometry.gnb(gnb_id).gnb_id] is None:
        return OUTAGE
    g = geometry.gnb(gnb_id)
    _, loss = gnb_beam(geometry, gnb_id, snap.surface_xy, beam)
    return (g.eirp_dbm - loss - fspl(snap.gnb_surface_dist[gnb_id], g.carrier_ghz)
            - budget.l_window + budget.g_ris_rx + budget.g_ris_tx)


def ue_terms(geometry: NodeGeometry, ue_id: int, beam: int | None = None,
             f_ghz: float | None = None) -> tuple[float, float]:
    """(G_ue, L_ue) of the surface-to-UE hop; G_ue includes the UE beam loss."""
    snap = snapshot(geometry)
    u = geometry.ue(ue_id)
    f = geometry.surface.carrier_ghz if f_ghz is None else f_ghz
    _, loss = _pick_beam(u.beam_centers(geometry.pose.heading),
                         _bearing(snap.ue_xy[ue_id], snap.surface_xy), u.beamwidth, beam)
    return u.g_ue_dbi - loss, -fspl(snap.ue_surface_dist[ue_id], f)


def reflect_offset_db(geometry: NodeGeometry, budget: LinkBudgetParams, serving_id: int) -> float:
    """K_s: calibrated reflective value minus the physically received reflected power."""
    g = geometry.gnb(serving_id)
    return g.eirp_dbm + budget.g_ris_rx + budget.g_ris_tx - g.g_rx_dbi


def reflected_snr_db(value: float, geometry: NodeGeometry, budget: LinkBudgetParams,
                     serving_id: int) -> float:
    """SNR at the serving gNB of a calibrated reflective sample."""
    return value - reflect_offset_db(geometry, budget, serving_id) - budget.p_nf


def _surface_config(surface, geometry: NodeGeometry) -> SurfaceConfig:
    if surface is None:
        return SurfaceConfig.off(geometry.surface.n_elements)
    return getattr(surface, "config", surface)


def _direct_attenuation(geometry: NodeGeometry, budget: LinkBudgetParams, zone_name: str | None):
    zone = geometry.zone(zone_name)
    if zone is None:
        return budget.l_window
    return zone.attenuation_db


def rsrp(geometry: NodeGeometry, budget: LinkBudgetParams, surface, path: PathKind,
         ue_id: int | None, noise: "NoiseModel | None", t: int, gnb_id: int,
         serving_id: int | None = None, beams: BeamIds = BeamIds(),
         model: AtomModel = DEFAULT_ATOM_MODEL) -> RsrpSample:
    """
    One RSRP sample of gNB `gnb_id`.

    `surface` is a codebook entry, a surface config or None (unprogrammed surface).
    Transmissive and direct paths end at UE `ue_id`. The reflective path runs from the
    neighbor `gnb_id` over the surface back to `serving_id` and is expressed in the
    calibrated decision frame X_n + X_s + G_ref. Pattern values are taken at the actual
    geometric angles. Outage is reported as -inf, never raised.
    """
    path = PathKind(path)
    snap = snapshot(geometry)
    g = geometry.gnb(gnb_id)
    out_beams = beams

    if path is PathKind.DIRECT:
        u = geometry.ue(ue_id)
        ue_xy = snap.ue_xy[ue_id]
        g_idx, g_loss = gnb_beam(geometry, gnb_id, ue_xy, beams.gnb_beam)
        u_idx, u_loss = _pick_beam(u.beam_centers(geometry.pose.heading), _bearing(ue_xy, g.position),
                                   u.beamwidth, beams.ue_beam)
        atten = _direct_attenuation(geometry, budget, u.zone)
        if atten is None:
            value = OUTAGE
        else:
            d = float(np.hypot(g.position[0] - ue_xy[0], g.position[1] - ue_xy[1]))
            value = g.eirp_dbm - g_loss - fspl(d, g.carrier_ghz) - atten + u.g_ue_dbi - u_loss
        out_beams = replace(beams, gnb_beam=g_idx, ue_beam=u_idx)

    elif path is PathKind.TRANSMISSIVE:
        config = _surface_config(surface, geometry)
        inc = snap.incident[gnb_id]
        out = snap.ue_out_angle[geometry.ue(ue_id).ue_id]
        g_idx, _ = gnb_beam(geometry, gnb_id, snap.surface_xy, beams.gnb_beam)
        if inc is None or out is None:
            value = OUTAGE
        else:
            x_g = link_aggregate(geometry, budget, gnb_id, beams.gnb_beam)
            g_ue, l_ue = ue_terms(geometry, ue_id, beams.ue_beam)
            value = x_g + gain_at(config, geometry.surface, out, Side.TRANSMISSIVE, inc, model) + g_ue + l_ue
        out_beams = replace(beams, gnb_beam=g_idx)

    else:
        if serving_id is None:
            raise DomainError("the reflective path needs a serving gNB")
        config = _surface_config(surface, geometry)
        if config.mode in (SurfaceMode.SINGLE_TRANSMISSIVE, SurfaceMode.DUAL_TRANSMISSIVE):
            raise DomainError(f"a {config.mode.value} configuration has no reflective beam")
        inc_n = snap.incident[gnb_id]
        inc_s = snap.incident[geometry.gnb(serving_id).gnb_id]
        if inc_n is None or inc_s is None:
            value = OUTAGE
        else:
            value = (link_aggregate(geometry, budget, gnb_id) + link_aggregate(geometry, budget, serving_id)
                     + gain_at(config, geometry.surface, inc_s, Side.REFLECTIVE, inc_n, model))
        ue_id = None

    if noise is not None and math.isfinite(value):
        value += noise.sample(ue_id, gnb_id, path, serving_id, t)
    return RsrpSample(int(t), gnb_id, path, float(value), out_beams, ue_id)


# ─── Shadowing ──────────────────────────────────────────────────────────────────

@lru_cache(maxsize=1 << 16)
def _unit_normal(key: tuple[int, ...]) -> float:
    return float(np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key)))).standard_normal())


@dataclass(frozen=True)
class NoiseModel:
    """
    Zero-mean Gaussian shadowing, constant within a coherence block.

    Each value is keyed by (seed, ue, gnb, path, serving, block), so query order never
    changes what a query returns.
    """
    sigma_db: float = 2.0
    seed: int = 0
    coherence_ms: int = 10

    def __post_init__(self):
        if self.sigma_db < 0 or self.coherence_ms < 1:
            raise DomainError("noise needs sigma_db >= 0 and coherence_ms >= 1")

    def sample(self, ue_id: int | None, gnb_id: int, path: PathKind, serving_id: int | None,
               t: int) -> float:
        if self.sigma_db == 0.0:
            return 0.0
        ue = -1 if ue_id is None else ue_id
        serving = -1 if serving_id is None else serving_id
        key = (int(self.seed), ue + 1, int(gnb_id), PATH_CODES[PathKind(path)], serving + 1,
               int(t) // self.coherence_ms)
        return self.sigma_db * _unit_normal(key)


# ─── Coverage ──────────────────────────────────────────────────────────────────

def zone_at(geometry: NodeGeometry, x: float, y: float) -> Zone | None:
    for z in geometry.zones:
        if z.contains(x, y):
            return z
    return None


def coverage_map(geometry: NodeGeometry, budget: LinkBudgetParams, surface, gnb_id: int,
                 xs: Iterable[float], ys: Iterable[float],
                 model: AtomModel = DEFAULT_ATOM_MODEL) -> pd.DataFrame:
    """
    Direct and via-surface RSRP over a grid of interior points (vehicle frame), noise-free.

    Points inside a blocked zone have no direct signal (-inf).
    """
    rows = []
    for x in xs:
        for y in ys:
            zone = zone_at(geometry, x, y)
            probe = UeSite(ue_id=0, offset=(x, y), zone=None if zone is None else zone.name)
            geo = replace(geometry, ues=(probe,))
            direct = rsrp(geo, budget, None, PathKind.DIRECT, 0, None, 0, gnb_id, model=model).value
            via = rsrp(geo, budget, surface, PathKind.TRANSMISSIVE, 0, None, 0, gnb_id, model=model).value
            rows.append({"x": float(x), "y": float(y), "zone": None if zone is None else zone.name,
                         "direct_dbm": direct, "surface_dbm": via})
    return pd.DataFrame(rows, columns=["x", "y", "zone", "direct_dbm", "surface_dbm"])

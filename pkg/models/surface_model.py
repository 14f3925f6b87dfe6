"""
Huygens metasurface model.

Element level: bias voltages (u_m, u_e) → complex transmission/reflection coefficients.
Aperture level: array factor, beam patterns and realized gains of a 1-D linear aperture.

Angle convention: the progressive phase of element n is 2π·d·n·(sin θ + sin θ_inc), with d
in wavelengths. Output angles on both faces are oriented so that an unprogrammed aperture
radiates at -θ_inc (specular reflection, undeviated transmission).
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Protocol

import numpy as np
from scipy.integrate import trapezoid

from models.errors import DomainError
from utils.db_math import amplitude_to_db

logger = logging.getLogger(__name__)

VOLTAGE_MIN = 0.0
VOLTAGE_MAX = 16.0
MODEL_BAND_GHZ = (25.0, 27.0)
ANGLE_LIMIT_DEG = 70.0
EVAL_GRID = np.arange(-70.0, 71.0, 1.0)


class Side(str, Enum):
    TRANSMISSIVE = "transmissive"
    REFLECTIVE = "reflective"


class SurfaceMode(str, Enum):
    SINGLE_TRANSMISSIVE = "single-transmissive"
    SINGLE_REFLECTIVE = "single-reflective"
    DUAL_TRANSFLECTIVE = "dual-transflective"
    DUAL_TRANSMISSIVE = "dual-transmissive"
    OFF = "off"


@dataclass(frozen=True)
class MetaAtomResponse:
    u_m: float
    u_e: float
    f: float
    c_t: complex
    c_r: complex


class AtomModel(Protocol):
    name: str
    band: tuple[float, float]

    def coefficients(self, u_m, u_e, f) -> tuple[np.ndarray, np.ndarray]:
        ...


@dataclass(frozen=True)
class ResonatorModel:
    """
    Coupled Lorentzian meta-atom.

    - electric sheet admittance  y_e = 1 / (r_e + j·k_e·(f/f_e − f_e/f))
    - magnetic sheet impedance   z_m = 1 / (r_m + j·k_m·(f/f_m − f_m/f))
    - resonances affine in bias: f_e = f_e0 + s_e·u_e, f_m = f_m0 + s_m·u_m
    - c_t = (a + b)/2, c_r = (a − b)/2 with a = (2 − y_e)/(2 + y_e), b = (2 − z_m)/(2 + z_m)

    With r_e, r_m ≥ 0 both |a| and |b| are ≤ 1, so |c_t|² + |c_r|² = (|a|² + |b|²)/2 ≤ 1.
    Both resonances cross 26 GHz at 8 V; along u_m + u_e = 16 the two sheets are balanced
    (c_r = 0) and arg c_t sweeps the circle.
    """
    name: str = "lorentzian"
    f_e0: float = 24.5
    s_e: float = 3.0 / 16.0
    f_m0: float = 27.5
    s_m: float = -3.0 / 16.0
    k_e: float = 60.0
    k_m: float = 60.0
    r_e: float = 0.05
    r_m: float = 0.05
    band: tuple[float, float] = MODEL_BAND_GHZ

    def __post_init__(self):
        if self.r_e < 0 or self.r_m < 0:
            raise DomainError("resonator resistances must be non-negative")

    def coefficients(self, u_m, u_e, f):
        u_m = np.asarray(u_m, dtype=float)
        u_e = np.asarray(u_e, dtype=float)
        f = np.asarray(f, dtype=float)
        f_e = self.f_e0 + self.s_e * u_e
        f_m = self.f_m0 + self.s_m * u_m
        y_e = 1.0 / (self.r_e + 1j * self.k_e * (f / f_e - f_e / f))
        z_m = 1.0 / (self.r_m + 1j * self.k_m * (f / f_m - f_m / f))
        a = (2.0 - y_e) / (2.0 + y_e)
        b = (2.0 - z_m) / (2.0 + z_m)
        return 0.5 * (a + b), 0.5 * (a - b)


DEFAULT_ATOM_MODEL = ResonatorModel()


def check_voltages(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)) or np.any(u < VOLTAGE_MIN) or np.any(u > VOLTAGE_MAX):
        raise DomainError(f"bias voltages must lie in [{VOLTAGE_MIN}, {VOLTAGE_MAX}] V")
    return u


def check_frequency(f_ghz: float, model: AtomModel = DEFAULT_ATOM_MODEL) -> float:
    lo, hi = model.band
    if not (lo <= f_ghz <= hi):
        raise DomainError(f"frequency {f_ghz} GHz outside model band [{lo}, {hi}] GHz")
    return float(f_ghz)


def atom_response(u_m: float, u_e: float, f: float,
                  model: AtomModel = DEFAULT_ATOM_MODEL) -> MetaAtomResponse:
    check_voltages([u_m, u_e])
    check_frequency(f, model)
    c_t, c_r = model.coefficients(u_m, u_e, f)
    return MetaAtomResponse(float(u_m), float(u_e), float(f), complex(c_t), complex(c_r))


@dataclass(frozen=True)
class SurfaceGeometry:
    n_elements: int = 64
    element_spacing: float = 0.5
    carrier_ghz: float = 26.0

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise DomainError("n_elements must be a positive integer")
        if not self.element_spacing > 0:
            raise DomainError("element_spacing must be positive")
        object.__setattr__(self, "n_elements", int(self.n_elements))
        object.__setattr__(self, "element_spacing", float(self.element_spacing))
        object.__setattr__(self, "carrier_ghz", float(self.carrier_ghz))

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"n_elements": self.n_elements,
             "element_spacing": self.element_spacing,
             "carrier_ghz": self.carrier_ghz},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class SurfaceConfig:
    """Per-element (u_m, u_e) voltage pairs, shape (N, 2), plus the operating mode."""
    voltages: np.ndarray
    mode: SurfaceMode

    def __post_init__(self):
        v = np.array(self.voltages, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 1:
            raise DomainError("voltages must be a sequence of (u_m, u_e) pairs")
        check_voltages(v)
        v.setflags(write=False)
        object.__setattr__(self, "voltages", v)
        object.__setattr__(self, "mode", SurfaceMode(self.mode))

    @property
    def n_elements(self) -> int:
        return self.voltages.shape[0]

    @classmethod
    def off(cls, n_elements: int) -> "SurfaceConfig":
        return cls(np.zeros((n_elements, 2)), SurfaceMode.OFF)

    @classmethod
    def uniform(cls, n_elements: int, u_m: float, u_e: float,
                mode: SurfaceMode = SurfaceMode.SINGLE_TRANSMISSIVE) -> "SurfaceConfig":
        return cls(np.tile([u_m, u_e], (n_elements, 1)), mode)

    def __eq__(self, other):
        if not isinstance(other, SurfaceConfig):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.voltages, other.voltages)

    def __hash__(self):
        return hash((self.mode, self.voltages.tobytes()))


@dataclass(frozen=True, eq=False)
class BeamPattern:
    angles: np.ndarray
    gain_t: np.ndarray
    gain_r: np.ndarray

    def gains(self, side: Side) -> np.ndarray:
        return self.gain_t if Side(side) is Side.TRANSMISSIVE else self.gain_r

    def argmax(self, side: Side) -> float:
        return float(self.angles[int(np.argmax(self.gains(side)))])

    def local_maxima(self, side: Side, min_gain_db: float = -np.inf) -> list[float]:
        g = self.gains(side)
        padded = np.concatenate(([-np.inf], g, [-np.inf]))
        peaks = (padded[1:-1] > padded[:-2]) & (padded[1:-1] >= padded[2:]) & (g >= min_gain_db)
        return [float(a) for a in self.angles[peaks]]


@lru_cache(maxsize=8192)
def element_coefficients(config: SurfaceConfig, model: AtomModel = DEFAULT_ATOM_MODEL,
                         f_ghz: float = 26.0) -> tuple[np.ndarray, np.ndarray]:
    check_frequency(f_ghz, model)
    c_t, c_r = model.coefficients(config.voltages[:, 0], config.voltages[:, 1], f_ghz)
    c_t = np.asarray(c_t, dtype=complex)
    c_r = np.asarray(c_r, dtype=complex)
    c_t.setflags(write=False)
    c_r.setflags(write=False)
    return c_t, c_r


def electrical_spacing(geometry: SurfaceGeometry, f_ghz: float | None = None) -> float:
    f = geometry.carrier_ghz if f_ghz is None else f_ghz
    return geometry.element_spacing * f / geometry.carrier_ghz


def progressive_phase(geometry: SurfaceGeometry, angle, incident_angle=0.0,
                      f_ghz: float | None = None) -> np.ndarray:
    """
    Phase 2π·d·n·(sin θ + sin θ_inc), shape (..., N) for scalar or array angles.
    """
    d = electrical_spacing(geometry, f_ghz)
    n = np.arange(geometry.n_elements)
    u = np.sin(np.deg2rad(angle)) + np.sin(np.deg2rad(incident_angle))
    return 2.0 * np.pi * d * np.multiply.outer(u, n)


def ideal_phases(geometry: SurfaceGeometry, angle: float, incident_angle: float = 0.0) -> np.ndarray:
    return progressive_phase(geometry, angle, incident_angle)


def equivalent_angle(angle: float, incident_angle: float) -> float | None:
    """
    Normal-incidence steering angle with the same phase gradient as (angle, incident_angle).

    Returns None when sin θ + sin θ_inc leaves the visible range.
    """
    s = math.sin(math.radians(angle)) + math.sin(math.radians(incident_angle))
    if abs(s) > 1.0:
        return None
    return math.degrees(math.asin(s))


def _check_angle(angle, limit=90.0, what="angle"):
    a = np.asarray(angle, dtype=float)
    if a.size == 0:
        raise DomainError(f"empty {what} grid")
    if not np.all(np.isfinite(a)) or np.any(np.abs(a) > limit):
        raise DomainError(f"{what} must lie within ±{limit}°")
    return a


def _check_length(config: SurfaceConfig, geometry: SurfaceGeometry):
    if config.n_elements != geometry.n_elements:
        raise DomainError(
            f"config has {config.n_elements} elements, geometry has {geometry.n_elements}")


def _side_coefficients(config, side, model, f_ghz):
    c_t, c_r = element_coefficients(config, model, f_ghz)
    return c_t if Side(side) is Side.TRANSMISSIVE else c_r


def array_factor(config: SurfaceConfig, geometry: SurfaceGeometry, angle: float, side: Side,
                 incident_angle: float = 0.0, model: AtomModel = DEFAULT_ATOM_MODEL,
                 f_ghz: float | None = None) -> complex:
    _check_angle(angle)
    _check_angle(incident_angle, what="incident angle")
    _check_length(config, geometry)
    f = geometry.carrier_ghz if f_ghz is None else f_ghz
    c = _side_coefficients(config, side, model, f)
    phase = progressive_phase(geometry, float(angle), float(incident_angle), f)
    return complex(np.sum(c * np.exp(-1j * phase)))


def gain_at(config: SurfaceConfig, geometry: SurfaceGeometry, angle: float, side: Side,
            incident_angle: float = 0.0, model: AtomModel = DEFAULT_ATOM_MODEL,
            f_ghz: float | None = None) -> float:
    """Pattern value in dB at one angle, relative to the coherent full-aperture sum."""
    af = array_factor(config, geometry, angle, side, incident_angle, model, f_ghz)
    return amplitude_to_db(abs(af) / geometry.n_elements)


def beam_pattern(config: SurfaceConfig, geometry: SurfaceGeometry, incident_angle: float = 0.0,
                 grid=EVAL_GRID, model: AtomModel = DEFAULT_ATOM_MODEL,
                 f_ghz: float | None = None) -> BeamPattern:
    grid = _check_angle(grid, what="pattern")
    _check_angle(incident_angle, what="incident angle")
    _check_length(config, geometry)
    f = geometry.carrier_ghz if f_ghz is None else f_ghz
    c_t, c_r = element_coefficients(config, model, f)
    steering = np.exp(-1j * progressive_phase(geometry, grid, incident_angle, f))
    n = geometry.n_elements
    gain_t = amplitude_to_db(np.abs(steering @ c_t) / n)
    gain_r = amplitude_to_db(np.abs(steering @ c_r) / n)
    return BeamPattern(np.array(grid, dtype=float), np.atleast_1d(gain_t), np.atleast_1d(gain_r))


def second_beam_side(mode: SurfaceMode) -> Side:
    """Face that carries the θ_r beam of a configuration."""
    return Side.TRANSMISSIVE if SurfaceMode(mode) is SurfaceMode.DUAL_TRANSMISSIVE else Side.REFLECTIVE


def realized_gains(config: SurfaceConfig, geometry: SurfaceGeometry, theta_t: float, theta_r: float,
                   incident_angle: float = 0.0,
                   model: AtomModel = DEFAULT_ATOM_MODEL) -> tuple[float, float]:
    _check_angle([theta_t, theta_r], limit=ANGLE_LIMIT_DEG, what="target angle")
    g_tra = gain_at(config, geometry, theta_t, Side.TRANSMISSIVE, incident_angle, model)
    g_ref = gain_at(config, geometry, theta_r, second_beam_side(config.mode), incident_angle, model)
    return g_tra, g_ref


def radiated_fraction(config: SurfaceConfig, geometry: SurfaceGeometry, incident_angle: float = 0.0,
                      model: AtomModel = DEFAULT_ATOM_MODEL, samples: int | None = None) -> float:
    """
    Power radiated into the visible region by both faces, relative to the incident power.

    Integrates |AF|² over u = sin θ ∈ [-1, 1]; for spacing ≤ λ/2 the result is
    Σ(|c_t|² + |c_r|²)/N at most, which passivity bounds by 1.
    """
    _check_length(config, geometry)
    n = geometry.n_elements
    u = np.linspace(-1.0, 1.0, samples or 64 * n + 1)
    d = electrical_spacing(geometry)
    c_t, c_r = element_coefficients(config, model, geometry.carrier_ghz)
    u_total = u + math.sin(math.radians(incident_angle))
    steering = np.exp(-2j * np.pi * d * np.multiply.outer(u_total, np.arange(n)))
    power = np.abs(steering @ c_t) ** 2 + np.abs(steering @ c_r) ** 2
    return float(d * trapezoid(power, u) / n)

"""
Angle-indexed voltage codebook for the Huygens surface.

Each entry maximizes the dual-beam objective

    | Σ_n ( √(1−α)·c_t,n·e^{−jφ_1,n} + √α·c_2,n·e^{−jφ_2,n} ) |²

where c_2 is the reflection coefficient (dual-transflective) or the transmission
coefficient (dual-transmissive), and single-beam keys keep one term only. Synthesis runs a
genetic algorithm (pygad) seeded with phase-projection solutions; the hard-partition
baseline splits the aperture between the two beams instead.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import pandas as pd
import pygad

from models.errors import CodebookError, CodebookParseError, ConfigError, DomainError
from models.surface_model import (ANGLE_LIMIT_DEG, DEFAULT_ATOM_MODEL, EVAL_GRID, VOLTAGE_MAX,
                                  VOLTAGE_MIN, AtomModel, Side, SurfaceConfig, SurfaceGeometry,
                                  SurfaceMode, beam_pattern, electrical_spacing, gain_at,
                                  progressive_phase, realized_gains)
from utils.db_math import power_to_db
from utils.files import atomic_write_frame, atomic_write_text

logger = logging.getLogger(__name__)

ALPHA_SET = (0.0, 0.25, 0.5, 0.75, 1.0)
KEY_STEP_DEG = 5.0
KEY_GRID = np.arange(-ANGLE_LIMIT_DEG, ANGLE_LIMIT_DEG + 1.0, KEY_STEP_DEG)

FORMAT_NAME = "hms-codebook"
FORMAT_VERSION = 1


class CodebookMode(str, Enum):
    SINGLE = "single"
    DUAL_TRANSFLECTIVE = "dual-transflective"
    DUAL_TRANSMISSIVE = "dual-transmissive"


@dataclass(frozen=True, order=True)
class CodebookKey:
    theta_t: float
    theta_r: float
    alpha: float
    mode: CodebookMode = CodebookMode.DUAL_TRANSFLECTIVE

    def __post_init__(self):
        object.__setattr__(self, "theta_t", float(self.theta_t))
        object.__setattr__(self, "theta_r", float(self.theta_r))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "mode", CodebookMode(self.mode))
        for name in ("theta_t", "theta_r"):
            value = getattr(self, name)
            if not math.isfinite(value) or abs(value) > ANGLE_LIMIT_DEG:
                raise DomainError(f"{name}={value}° outside ±{ANGLE_LIMIT_DEG}°")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha={self.alpha} outside [0, 1]")
        if self.mode is CodebookMode.SINGLE and self.alpha not in (0.0, 1.0):
            raise DomainError("single-beam keys take alpha 0 (transmissive) or 1 (reflective)")

    @property
    def is_dual(self) -> bool:
        return self.mode is not CodebookMode.SINGLE

    @property
    def surface_mode(self) -> SurfaceMode:
        if self.mode is CodebookMode.DUAL_TRANSMISSIVE:
            return SurfaceMode.DUAL_TRANSMISSIVE
        if self.mode is CodebookMode.DUAL_TRANSFLECTIVE:
            return SurfaceMode.DUAL_TRANSFLECTIVE
        return SurfaceMode.SINGLE_REFLECTIVE if self.alpha == 1.0 else SurfaceMode.SINGLE_TRANSMISSIVE

    @property
    def label(self) -> str:
        return f"(θ_t={self.theta_t:g}°, θ_r={self.theta_r:g}°, α={self.alpha:g}, {self.mode.value})"


@dataclass(frozen=True)
class GaSettings:
    population: int = 128
    generations: int = 300
    tournament: int = 4
    mutation_sigma: float = 0.8
    mutation_p: float = 0.05
    elitism: int = 2
    levels: tuple[float, ...] | None = None
    lattice_step: float = 0.1
    seed_phases: int = 8
    sidelobe_weight: float = 0.0

    def __post_init__(self):
        if self.population < 4 or self.generations < 1:
            raise DomainError("GA needs population >= 4 and generations >= 1")
        if not 0 <= self.elitism < self.population:
            raise DomainError("elitism must be smaller than the population")
        if self.levels is not None:
            levels = tuple(sorted(float(v) for v in self.levels))
            if len(levels) < 2 or levels[0] < VOLTAGE_MIN or levels[-1] > VOLTAGE_MAX:
                raise DomainError("quantization levels must be >= 2 values within [0, 16] V")
            object.__setattr__(self, "levels", levels)


@dataclass(frozen=True)
class CodebookEntry:
    key: CodebookKey
    config: SurfaceConfig
    g_w_tra: float
    g_w_ref: float
    objective: float
    sidelobe_margin: float
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def objective_db(self) -> float:
        return power_to_db(self.objective)


# ─── Objective ──────────────────────────────────────────────────────────────────

def _beam_terms(key: CodebookKey, geometry: SurfaceGeometry, incident_angle: float):
    """(weight, side, target angle, phase vector) for every term with non-zero weight."""
    if key.mode is CodebookMode.SINGLE:
        if key.alpha == 1.0:
            beams = [(1.0, Side.REFLECTIVE, key.theta_r)]
        else:
            beams = [(1.0, Side.TRANSMISSIVE, key.theta_t)]
    else:
        second = Side.TRANSMISSIVE if key.mode is CodebookMode.DUAL_TRANSMISSIVE else Side.REFLECTIVE
        beams = [(math.sqrt(1.0 - key.alpha), Side.TRANSMISSIVE, key.theta_t),
                 (math.sqrt(key.alpha), second, key.theta_r)]
    return [(w, side, angle, progressive_phase(geometry, angle, incident_angle))
            for w, side, angle in beams if w > 0.0]


def _element_terms(terms, c_t, c_r):
    """Per-element contribution to the objective's inner sum; broadcasts over leading axes."""
    total = 0.0
    for weight, side, _, phase in terms:
        c = c_t if side is Side.TRANSMISSIVE else c_r
        total = total + weight * c * np.exp(-1j * phase)
    return total


def objective_value(config: SurfaceConfig, key: CodebookKey, geometry: SurfaceGeometry,
                    incident_angle: float = 0.0, model: AtomModel = DEFAULT_ATOM_MODEL) -> float:
    c_t, c_r = model.coefficients(config.voltages[:, 0], config.voltages[:, 1], geometry.carrier_ghz)
    terms = _beam_terms(key, geometry, incident_angle)
    return float(np.abs(np.sum(_element_terms(terms, c_t, c_r))) ** 2)


def _mainlobe_mask(angles: np.ndarray, target: float, geometry: SurfaceGeometry) -> np.ndarray:
    half_width = 1.0 / (geometry.n_elements * electrical_spacing(geometry))
    return np.abs(np.sin(np.deg2rad(angles)) - math.sin(math.radians(target))) < half_width


def sidelobe_margin(config: SurfaceConfig, key: CodebookKey, geometry: SurfaceGeometry,
                    incident_angle: float = 0.0, model: AtomModel = DEFAULT_ATOM_MODEL) -> float:
    """Weaker main lobe minus the strongest pattern value outside the main-lobe windows (dB)."""
    terms = _beam_terms(key, geometry, incident_angle)
    pattern = beam_pattern(config, geometry, incident_angle, EVAL_GRID, model)
    mains = [gain_at(config, geometry, angle, side, incident_angle, model) for _, side, angle, _ in terms]

    sidelobes = []
    for side in {side for _, side, _, _ in terms}:
        keep = np.ones(pattern.angles.shape, dtype=bool)
        for _, s, angle, _ in terms:
            if s is side:
                keep &= ~_mainlobe_mask(pattern.angles, angle, geometry)
        sidelobes.append(pattern.gains(side)[keep])
    rest = np.concatenate(sidelobes)
    if rest.size == 0:
        return math.inf
    return float(min(mains) - rest.max())


# ─── Voltage lattices and seeding ───────────────────────────────────────────────

@lru_cache(maxsize=32)
def _lattice(model: AtomModel, f_ghz: float, step: float, levels: tuple[float, ...] | None):
    if levels is not None:
        axis = np.asarray(levels, dtype=float)
    else:
        axis = np.linspace(VOLTAGE_MIN, VOLTAGE_MAX, int(round((VOLTAGE_MAX - VOLTAGE_MIN) / step)) + 1)
    u_m, u_e = np.meshgrid(axis, axis, indexing="ij")
    volts = np.column_stack([u_m.ravel(), u_e.ravel()])
    c_t, c_r = model.coefficients(volts[:, 0], volts[:, 1], f_ghz)
    return volts, np.asarray(c_t, complex), np.asarray(c_r, complex)


def _to_genome(volts: np.ndarray) -> np.ndarray:
    return volts.reshape(-1)


def _from_genome(genome: np.ndarray) -> np.ndarray:
    return np.asarray(genome, dtype=float).reshape(-1, 2)


def _projection_seeds(terms, lattice, n_elements: int, n_phases: int) -> np.ndarray:
    """
    For each global phase ψ, every element takes the lattice point maximizing
    Re(e^{−jψ}·term_n). Returns (n_phases, 2N) genomes.
    """
    volts, c_t, c_r = lattice
    psi = 2.0 * np.pi * np.arange(n_phases) / n_phases
    rot = np.exp(-1j * psi)[:, None]
    seeds = np.empty((n_phases, n_elements, 2))
    for n in range(n_elements):
        z = 0.0
        for weight, side, _, phase in terms:
            c = c_t if side is Side.TRANSMISSIVE else c_r
            z = z + weight * c * np.exp(-1j * phase[n])
        choice = np.argmax(np.real(rot * z[None, :]), axis=1)
        seeds[:, n, :] = volts[choice]
    return seeds.reshape(n_phases, -1)


def partition_split(alpha: float, n_elements: int) -> tuple[int, int]:
    """Elements given to the first (transmissive) beam and to the second beam."""
    n_first = math.floor(round((1.0 - alpha) * n_elements, 9))
    return n_first, n_elements - n_first


def _hard_partition_volts(key: CodebookKey, geometry: SurfaceGeometry, incident_angle: float,
                          lattice) -> np.ndarray:
    volts, c_t, c_r = lattice
    second = Side.TRANSMISSIVE if key.mode is CodebookMode.DUAL_TRANSMISSIVE else Side.REFLECTIVE
    phase_1 = progressive_phase(geometry, key.theta_t, incident_angle)
    phase_2 = progressive_phase(geometry, key.theta_r, incident_angle)
    n_first, _ = partition_split(key.alpha, geometry.n_elements)

    out = np.empty((geometry.n_elements, 2))
    for n in range(geometry.n_elements):
        if n < n_first:
            score = np.real(c_t * np.exp(-1j * phase_1[n]))
        else:
            c = c_t if second is Side.TRANSMISSIVE else c_r
            score = np.real(c * np.exp(-1j * phase_2[n]))
        out[n] = volts[int(np.argmax(score))]
    return out


def entry_seed(seed: int, key: CodebookKey) -> int:
    """Per-key GA seed; independent of synthesis order."""
    digest = hashlib.sha256(
        f"{key.theta_t!r}|{key.theta_r!r}|{key.alpha!r}|{key.mode.value}".encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in (0, 4)]
    return int(np.random.SeedSequence([int(seed)] + words).generate_state(1)[0])


def _make_entry(key, config, geometry, incident_angle, model, history=()) -> CodebookEntry:
    g_tra, g_ref = realized_gains(config, geometry, key.theta_t, key.theta_r, incident_angle, model)
    return CodebookEntry(
        key=key,
        config=config,
        g_w_tra=g_tra,
        g_w_ref=g_ref,
        objective=objective_value(config, key, geometry, incident_angle, model),
        sidelobe_margin=sidelobe_margin(config, key, geometry, incident_angle, model),
        history=tuple(history),
    )


# ─── Synthesis ──────────────────────────────────────────────────────────────────

def synth_hard_partition(key: CodebookKey, geometry: SurfaceGeometry, incident_angle: float = 0.0,
                         settings: GaSettings = GaSettings(),
                         model: AtomModel = DEFAULT_ATOM_MODEL) -> CodebookEntry:
    """
    Baseline: the first ⌊(1−α)·N⌋ elements form the θ_t beam, the rest the θ_r beam, each
    element picking the lattice voltage closest to its own beam's ideal phase.
    """
    if not key.is_dual:
        raise DomainError(f"hard partitioning needs a dual-beam key, got {key.label}")
    lattice = _lattice(model, geometry.carrier_ghz, settings.lattice_step, settings.levels)
    volts = _hard_partition_volts(key, geometry, incident_angle, lattice)
    return _make_entry(key, SurfaceConfig(volts, key.surface_mode), geometry, incident_angle, model)


def synth_entry(key: CodebookKey, geometry: SurfaceGeometry, incident_angle: float = 0.0,
                seed: int = 0, settings: GaSettings = GaSettings(),
                model: AtomModel = DEFAULT_ATOM_MODEL) -> CodebookEntry:
    n = geometry.n_elements
    terms = _beam_terms(key, geometry, incident_angle)
    lattice = _lattice(model, geometry.carrier_ghz, settings.lattice_step, settings.levels)
    rng = np.random.default_rng(seed)
    levels = None if settings.levels is None else np.asarray(settings.levels)
    norm = float(n * n)

    def fitness_batch(genomes: np.ndarray) -> np.ndarray:
        genomes = np.atleast_2d(np.asarray(genomes, dtype=float))
        c_t, c_r = model.coefficients(genomes[:, 0::2], genomes[:, 1::2], geometry.carrier_ghz)
        value = np.abs(np.sum(_element_terms(terms, c_t, c_r), axis=-1)) ** 2 / norm
        if settings.sidelobe_weight > 0.0:
            value = value - settings.sidelobe_weight * _sidelobe_power(genomes, c_t, c_r)
        return value

    def _sidelobe_power(genomes, c_t, c_r):
        steering = np.exp(-1j * progressive_phase(geometry, EVAL_GRID, incident_angle))
        worst = np.zeros(genomes.shape[0])
        for side in {side for _, side, _, _ in terms}:
            keep = np.ones(EVAL_GRID.shape, dtype=bool)
            for _, s, angle, _ in terms:
                if s is side:
                    keep &= ~_mainlobe_mask(EVAL_GRID, angle, geometry)
            c = c_t if side is Side.TRANSMISSIVE else c_r
            power = np.abs(c @ steering[keep].T) ** 2 / norm
            if power.size:
                worst = np.maximum(worst, power.max(axis=1))
        return worst

    def fitness_func(ga_instance, solutions, solution_idx):
        return fitness_batch(solutions)

    def mutation_func(offspring, ga_instance):
        hit = rng.random(offspring.shape) < settings.mutation_p
        out = np.clip(offspring + hit * rng.normal(0.0, settings.mutation_sigma, offspring.shape),
                      VOLTAGE_MIN, VOLTAGE_MAX)
        if levels is not None:
            out = levels[np.abs(out[..., None] - levels).argmin(axis=-1)]
        return out

    # 1) seeded members: hard partition (dual keys) and phase projections
    seeds = [_projection_seeds(terms, lattice, n, settings.seed_phases)]
    if key.is_dual:
        seeds.insert(0, _to_genome(_hard_partition_volts(key, geometry, incident_angle, lattice))[None, :])
    seeded = np.vstack(seeds)[: settings.population]

    # 2) the rest uniform over the voltage square (or the level set)
    n_random = settings.population - seeded.shape[0]
    if levels is None:
        random_part = rng.uniform(VOLTAGE_MIN, VOLTAGE_MAX, (n_random, 2 * n))
    else:
        random_part = rng.choice(levels, size=(n_random, 2 * n))
    initial = np.vstack([seeded, random_part])

    ga = pygad.GA(
        num_generations=settings.generations,
        num_parents_mating=max(2, settings.population // 2),
        fitness_func=fitness_func,
        fitness_batch_size=settings.population,
        initial_population=initial,
        gene_type=float,
        parent_selection_type="tournament",
        K_tournament=settings.tournament,
        crossover_type="uniform",
        mutation_type=mutation_func,
        keep_elitism=settings.elitism,
        random_seed=int(seed),
        suppress_warnings=True,
        logger=logger,
    )
    ga.run()

    final = np.asarray(ga.population, dtype=float)
    best = final[int(np.argmax(fitness_batch(final)))]
    history = [float(v) for v in ga.best_solutions_fitness]
    logger.debug("GA %s: %d generations, best fitness %.4f", key.label, len(history), history[-1])
    config = SurfaceConfig(_from_genome(best), key.surface_mode)
    return _make_entry(key, config, geometry, incident_angle, model, history)


def quantized_optimum(key: CodebookKey, geometry: SurfaceGeometry, levels: Iterable[float],
                      incident_angle: float = 0.0, model: AtomModel = DEFAULT_ATOM_MODEL) -> float:
    """
    Exact maximum of the objective when every voltage takes one of `levels`.

    For a fixed phase reference ψ the best configuration picks, per element, the level pair
    maximizing Re(e^{−jψ}·z). That choice only changes where two candidates of one element
    tie, so evaluating ψ between all tie angles visits every distinct optimal selection.
    """
    levels = tuple(sorted(float(v) for v in levels))
    volts, c_t, c_r = _lattice(model, geometry.carrier_ghz, 0.0, levels)
    terms = _beam_terms(key, geometry, incident_angle)
    # z[n, m]: contribution of element n when it takes lattice point m
    z = _element_terms([(w, s, a, p[:, None]) for w, s, a, p in terms], c_t[None, :], c_r[None, :])

    ties = []
    iu = np.triu_indices(z.shape[1], k=1)
    for row in z:
        diff = row[iu[0]] - row[iu[1]]
        base = np.angle(diff[np.abs(diff) > 1e-15])
        ties.append(np.concatenate([base + np.pi / 2, base - np.pi / 2]))
    cuts = np.unique(np.mod(np.concatenate(ties), 2.0 * np.pi))
    if cuts.size == 0:
        psi = np.array([0.0])
    else:
        nxt = np.append(cuts[1:], cuts[0] + 2.0 * np.pi)
        psi = 0.5 * (cuts + nxt)

    best = 0.0
    for chunk in np.array_split(psi, max(1, psi.size // 512)):
        scores = np.real(np.exp(-1j * chunk)[:, None, None] * z[None, :, :])
        picks = np.take_along_axis(z[None, :, :], scores.argmax(axis=2)[..., None], axis=2)[..., 0]
        best = max(best, float((np.abs(picks.sum(axis=1)) ** 2).max()))
    return best


# ─── Codebook container ────────────────────────────────────────────────────────

def snap_angle(angle: float, step: float = KEY_STEP_DEG, limit: float = ANGLE_LIMIT_DEG) -> float:
    clamped = min(max(float(angle), -limit), limit)
    return float(step * round(clamped / step)) + 0.0


def key_grid(center: float, count: int = 8, step: float = KEY_STEP_DEG,
             limit: float = ANGLE_LIMIT_DEG) -> list[float]:
    """`count` key angles on the step grid around `center`, shifted to stay within ±limit."""
    c = snap_angle(center, step, limit)
    start = c - step * ((count - 1) // 2)
    start = max(-limit, min(start, limit - step * (count - 1)))
    return [float(start + step * i) + 0.0 for i in range(count)]


@dataclass
class Codebook:
    geometry: SurfaceGeometry
    entries: dict[CodebookKey, CodebookEntry] = field(default_factory=dict)
    incident_angle: float = 0.0

    @property
    def fingerprint(self) -> str:
        return self.geometry.fingerprint()

    def add(self, entry: CodebookEntry) -> None:
        if entry.key.alpha not in ALPHA_SET:
            raise DomainError(f"stored entries take alpha in {ALPHA_SET}, got {entry.key.alpha}")
        if entry.config.n_elements != self.geometry.n_elements:
            raise DomainError(f"entry {entry.key.label} does not match the codebook geometry")
        self.entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: CodebookKey) -> bool:
        return key in self.entries

    def keys(self) -> list[CodebookKey]:
        return sorted(self.entries)

    def lookup(self, key: CodebookKey) -> CodebookEntry:
        try:
            return self.entries[key]
        except KeyError:
            raise ConfigError(f"codebook has no entry for key {key.label}") from None

    def nearest(self, theta_t: float, theta_r: float, alpha: float,
                mode: CodebookMode = CodebookMode.DUAL_TRANSFLECTIVE) -> tuple[CodebookEntry, bool]:
        """
        Closest stored entry of the same mode; the flag is False when it is not an exact hit.

        Distance is Euclidean in (θ_t, θ_r), then |Δα|; ties go to smaller |θ_r|, then smaller α.
        """
        mode = CodebookMode(mode)
        candidates = [k for k in self.entries if k.mode is mode]
        if not candidates:
            raise ConfigError(f"codebook has no {mode.value} entries")
        best = min(candidates, key=lambda k: (
            math.hypot(k.theta_t - theta_t, k.theta_r - theta_r),
            abs(k.alpha - alpha), abs(k.theta_r), k.alpha))
        exact = (best.theta_t, best.theta_r, best.alpha) == (float(theta_t), float(theta_r), float(alpha))
        if not exact:
            logger.info("nearest-key fallback: requested (%g, %g, %g, %s), using %s",
                        theta_t, theta_r, alpha, mode.value, best.label)
        return self.entries[best], exact


def build_codebook_for_keys(keys: Iterable[CodebookKey], geometry: SurfaceGeometry, seed: int = 0,
                            incident_angle: float = 0.0, settings: GaSettings = GaSettings(),
                            model: AtomModel = DEFAULT_ATOM_MODEL,
                            on_entry: Callable[[CodebookEntry], None] | None = None) -> Codebook:
    keys = sorted(set(keys))
    if not keys:
        raise DomainError("no codebook keys to synthesize")
    cb = Codebook(geometry, incident_angle=incident_angle)
    for i, key in enumerate(keys, start=1):
        try:
            entry = synth_entry(key, geometry, incident_angle, entry_seed(seed, key), settings, model)
        except DomainError as exc:
            raise DomainError(f"{key.label}: {exc}") from exc
        cb.add(entry)
        logger.info("codebook entry %d/%d %s: objective %.2f dB, G_tra %.2f dB, G_ref %.2f dB",
                    i, len(keys), key.label, entry.objective_db, entry.g_w_tra, entry.g_w_ref)
        if on_entry is not None:
            on_entry(entry)
    return cb


def build_codebook(angles_t: Iterable[float], angles_r: Iterable[float], alpha_set: Iterable[float],
                   geometry: SurfaceGeometry, seed: int = 0,
                   mode: CodebookMode = CodebookMode.DUAL_TRANSFLECTIVE, incident_angle: float = 0.0,
                   settings: GaSettings = GaSettings(), model: AtomModel = DEFAULT_ATOM_MODEL,
                   on_entry: Callable[[CodebookEntry], None] | None = None) -> Codebook:
    angles_t, angles_r, alpha_set = list(angles_t), list(angles_r), list(alpha_set)
    if not angles_t or not angles_r:
        raise DomainError("angle grids must be non-empty")
    if not alpha_set:
        raise DomainError("alpha set must be non-empty")
    keys = []
    for t in angles_t:
        for r in angles_r:
            for a in alpha_set:
                try:
                    keys.append(CodebookKey(t, r, a, mode))
                except DomainError as exc:
                    raise DomainError(f"key ({t}, {r}, {a}, {CodebookMode(mode).value}): {exc}") from exc
    return build_codebook_for_keys(keys, geometry, seed, incident_angle, settings, model, on_entry)


# ─── Persistence ────────────────────────────────────────────────────────────────

def _entry_record(entry: CodebookEntry) -> dict:
    k = entry.key
    return {
        "theta_t": k.theta_t, "theta_r": k.theta_r, "alpha": k.alpha, "mode": k.mode.value,
        "surface_mode": entry.config.mode.value,
        "voltages": entry.config.voltages.tolist(),
        "g_w_tra": entry.g_w_tra, "g_w_ref": entry.g_w_ref,
        "objective": entry.objective, "sidelobe_margin": entry.sidelobe_margin,
    }


def _entry_from_record(rec: dict) -> CodebookEntry:
    key = CodebookKey(rec["theta_t"], rec["theta_r"], rec["alpha"], rec["mode"])
    config = SurfaceConfig(np.asarray(rec["voltages"], dtype=float), SurfaceMode(rec["surface_mode"]))
    return CodebookEntry(key, config, float(rec["g_w_tra"]), float(rec["g_w_ref"]),
                         float(rec["objective"]), float(rec["sidelobe_margin"]))


def dumps_codebook(cb: Codebook) -> str:
    g = cb.geometry
    header = {
        "format": FORMAT_NAME, "version": FORMAT_VERSION, "fingerprint": cb.fingerprint,
        "carrier_ghz": g.carrier_ghz, "n_elements": g.n_elements, "element_spacing": g.element_spacing,
        "incident_angle": cb.incident_angle, "n_entries": len(cb),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(_entry_record(cb.entries[k]), sort_keys=True) for k in cb.keys()]
    return "\n".join(lines) + "\n"


def save_codebook(cb: Codebook, path) -> Path:
    path = atomic_write_text(path, dumps_codebook(cb))
    logger.info("saved codebook with %d entries to %s", len(cb), path)
    return path


def load_codebook(path, geometry: SurfaceGeometry | None = None) -> Codebook:
    raw = Path(path).read_bytes()
    offset = 0
    header = None
    cb = None
    count = 0
    for line in raw.split(b"\n"):
        start, offset = offset, offset + len(line) + 1
        if not line.strip():
            continue
        try:
            rec = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise CodebookParseError("malformed codebook line", start) from None
        if header is None:
            header = rec
            cb = _codebook_from_header(header, geometry, start)
            continue
        try:
            cb.add(_entry_from_record(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise CodebookParseError(f"invalid codebook entry: {exc}", start) from None
        count += 1
    if header is None:
        raise CodebookParseError("empty codebook file", 0)
    if count != header["n_entries"]:
        raise CodebookParseError(
            f"codebook declares {header['n_entries']} entries but holds {count}", len(raw))
    logger.info("loaded codebook %s: %d entries", path, count)
    return cb


def _codebook_from_header(header: dict, geometry: SurfaceGeometry | None, offset: int) -> Codebook:
    try:
        if header["format"] != FORMAT_NAME or header["version"] != FORMAT_VERSION:
            raise CodebookParseError(f"unsupported codebook format {header['format']} "
                                     f"v{header['version']}", offset)
        stored = SurfaceGeometry(header["n_elements"], header["element_spacing"], header["carrier_ghz"])
        fingerprint = header["fingerprint"]
        int(header["n_entries"])
        incident = float(header.get("incident_angle", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CodebookParseError):
            raise
        raise CodebookParseError(f"invalid codebook header: {exc}", offset) from None
    if fingerprint != stored.fingerprint():
        raise CodebookError("codebook header fingerprint does not match its geometry fields")
    if geometry is not None and geometry.fingerprint() != fingerprint:
        raise CodebookError(
            f"codebook fingerprint {fingerprint} does not match geometry {geometry.fingerprint()}")
    return Codebook(stored, incident_angle=incident)


def codebook_table(cb: Codebook) -> pd.DataFrame:
    rows = []
    for k in cb.keys():
        e = cb.entries[k]
        rows.append({
            "theta_t": k.theta_t, "theta_r": k.theta_r, "alpha": k.alpha, "mode": k.mode.value,
            "g_w_tra_db": e.g_w_tra, "g_w_ref_db": e.g_w_ref,
            "objective_db": e.objective_db, "sidelobe_margin_db": e.sidelobe_margin,
            "voltages": " ".join(f"{um!r}:{ue!r}" for um, ue in e.config.voltages.tolist()),
        })
    return pd.DataFrame(rows, columns=["theta_t", "theta_r", "alpha", "mode", "g_w_tra_db", "g_w_ref_db",
                                       "objective_db", "sidelobe_margin_db", "voltages"])


def export_codebook(cb: Codebook, path) -> Path:
    return atomic_write_frame(path, codebook_table(cb))


def evaluate_codebook(cb: Codebook, model: AtomModel = DEFAULT_ATOM_MODEL) -> pd.DataFrame:
    """Stored gains next to gains recomputed from the stored voltages."""
    rows = []
    for k in cb.keys():
        e = cb.entries[k]
        g_tra, g_ref = realized_gains(e.config, cb.geometry, k.theta_t, k.theta_r, cb.incident_angle, model)
        rows.append({
            "theta_t": k.theta_t, "theta_r": k.theta_r, "alpha": k.alpha, "mode": k.mode.value,
            "g_w_tra_db": e.g_w_tra, "g_w_ref_db": e.g_w_ref,
            "g_w_tra_eval_db": g_tra, "g_w_ref_eval_db": g_ref,
            "max_dev_db": max(abs(g_tra - e.g_w_tra), abs(g_ref - e.g_w_ref)),
        })
    return pd.DataFrame(rows)

"""
Initial attachment and the slot-1 neighbor scan.

Attachment sweeps every (gNB beam, surface angle) pair in one SSB burst and repeats the
burst once per UE receive beam, so the full search ends after n_ue_beams SSB periods.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from models.codebook import Codebook, CodebookEntry, CodebookKey, CodebookMode
from models.errors import DomainError

logger = logging.getLogger(__name__)

SSB_PERIOD_MS = 20
SSB_BURST_MS = 5
N_GNB_BEAMS = 8
N_SURFACE_ANGLES = 8
N_UE_BEAMS = 4


@dataclass(frozen=True)
class Attachment:
    best: tuple[int, int, int] | None  # (gnb_beam, surface index, ue_beam)
    rsrp: float
    elapsed_ms: int

    @property
    def failed(self) -> bool:
        return self.best is None


def attachment_cube(oracle: Callable[[int, int, int], float], n_gnb_beams: int = N_GNB_BEAMS,
                    n_surface: int = N_SURFACE_ANGLES, n_ue_beams: int = N_UE_BEAMS) -> np.ndarray:
    cube = np.empty((n_gnb_beams, n_surface, n_ue_beams))
    for u in range(n_ue_beams):
        for g in range(n_gnb_beams):
            for s in range(n_surface):
                cube[g, s, u] = oracle(g, s, u)
    return cube


def elapsed_ms(n_ue_beams: int = N_UE_BEAMS, ssb_period_ms: int = SSB_PERIOD_MS) -> int:
    return n_ue_beams * ssb_period_ms


def _clean(cube) -> np.ndarray:
    cube = np.asarray(cube, dtype=float)
    return np.where(np.isnan(cube), -np.inf, cube)


def initial_attachment(oracle: Callable[[int, int, int], float], n_gnb_beams: int = N_GNB_BEAMS,
                       n_surface: int = N_SURFACE_ANGLES, n_ue_beams: int = N_UE_BEAMS,
                       ssb_period_ms: int = SSB_PERIOD_MS) -> Attachment:
    """Best (gnb_beam, surface index, ue_beam); the lowest index triple wins ties."""
    cube = _clean(attachment_cube(oracle, n_gnb_beams, n_surface, n_ue_beams))
    return best_of_cube(cube, ssb_period_ms)


def best_of_cube(cube, ssb_period_ms: int = SSB_PERIOD_MS) -> Attachment:
    cube = _clean(cube)
    if cube.ndim != 3 or cube.size == 0:
        raise DomainError("attachment needs a non-empty (gnb beam, surface, ue beam) cube")
    elapsed = elapsed_ms(cube.shape[2], ssb_period_ms)
    flat = int(np.argmax(cube))
    if not np.isfinite(cube.flat[flat]):
        return Attachment(None, -np.inf, elapsed)
    best = tuple(int(i) for i in np.unravel_index(flat, cube.shape))
    return Attachment(best, float(cube.flat[flat]), elapsed)


@dataclass(frozen=True)
class GroupAttachment:
    gnb_id: int
    gnb_beam: int
    surface_index: int
    ue_beams: dict[int, int]
    rsrp: float  # worst UE at the chosen beams


def select_serving(cubes: Mapping[int, Mapping[int, np.ndarray]]) -> GroupAttachment | None:
    """
    Serving gNB, gNB beam and surface angle for a group of UEs sharing the surface.

    `cubes[gnb_id][ue_id]` is that UE's (gnb beam, surface, ue beam) cube. Each UE keeps its
    own best receive beam; the pair maximizing the worst UE wins, then the lowest gNB id.
    """
    best = None
    for gnb_id in sorted(cubes):
        per_ue = {ue: _clean(c) for ue, c in cubes[gnb_id].items()}
        if not per_ue:
            raise DomainError(f"no UE cubes for gNB {gnb_id}")
        worst = np.min(np.stack([c.max(axis=2) for c in per_ue.values()]), axis=0)
        flat = int(np.argmax(worst))
        value = float(worst.flat[flat])
        if not np.isfinite(value) or (best is not None and value <= best.rsrp):
            continue
        g, s = (int(i) for i in np.unravel_index(flat, worst.shape))
        ue_beams = {ue: int(np.argmax(c[g, s])) for ue, c in per_ue.items()}
        best = GroupAttachment(gnb_id, g, s, ue_beams, value)
    return best


def neighbor_scan(theta_t: float, codebook: Codebook,
                  reflect_oracle: Callable[[float, CodebookEntry], float],
                  angles: Sequence[float], alpha: float = 0.75,
                  mode: CodebookMode = CodebookMode.DUAL_TRANSFLECTIVE) -> list[tuple[float, float]]:
    """
    One SSB burst over the reflective angles: (θ_r, M_r) per angle, in scan order.

    Every entry is looked up before measuring, so a missing key fails the whole scan.
    """
    entries = [codebook.lookup(CodebookKey(theta_t, r, alpha, mode)) for r in angles]
    return [(float(r), float(reflect_oracle(float(r), e))) for r, e in zip(angles, entries)]


def best_scan_sample(samples: Sequence[tuple[float, float]]) -> tuple[int, float, float] | None:
    """(index, θ_r, M_r) of the strongest finite sample; first wins ties."""
    best = None
    for i, (angle, value) in enumerate(samples):
        if np.isfinite(value) and (best is None or value > best[2]):
            best = (i, angle, value)
    return best

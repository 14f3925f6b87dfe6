"""
Two-slot bound on the serving-link aggregate X_s.

Slot 1 measures the reflective path, giving S_1 = X_n + X_s. Slot 2 measures every UE
through the transmissive beam, giving S_2,i = X_s + L_ue,i. With the unknown in-vehicle
loss L_ue,i inside [l_min, l_max]:

    max_i(S_2,i − l_max) <= X_s <= min_i(S_2,i − l_min)

and Δ_min = S_1 − 2·UB_s never exceeds the true Δ = X_n − X_s.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from models.errors import DomainError

logger = logging.getLogger(__name__)


class Decision(str, Enum):
    HANDOVER = "handover"
    STAY = "stay"


@dataclass(frozen=True)
class BoundEstimate:
    s1: float
    s2: tuple[float, ...]
    lb_s: float
    ub_s: float
    delta_min: float
    consistent: bool


def slot_aggregates(m_r: float, m_s: Sequence[float], g_w_ref: float, g_w_tra: float,
                    g_ue: Sequence[float]) -> tuple[float, tuple[float, ...]]:
    if len(m_s) == 0:
        raise DomainError("slot 2 needs at least one UE measurement")
    if len(m_s) != len(g_ue):
        raise DomainError(f"{len(m_s)} slot-2 measurements but {len(g_ue)} UE gains")
    s1 = m_r - g_w_ref
    s2 = tuple(float(m - g_w_tra - g) for m, g in zip(m_s, g_ue))
    return float(s1), s2


def bound_xs(s2: Sequence[float], l_min: float, l_max: float) -> tuple[float, float, bool]:
    """(lb_s, ub_s, consistent); an empty interval is reported, never clamped."""
    if len(s2) == 0:
        raise DomainError("bounding needs at least one UE")
    if l_min > l_max:
        raise DomainError(f"l_min {l_min} exceeds l_max {l_max}")
    lb = max(s - l_max for s in s2)
    ub = min(s - l_min for s in s2)
    return float(lb), float(ub), lb <= ub


def decide(s1: float, ub_s: float, h: float) -> Decision:
    if not (math.isfinite(s1) and math.isfinite(ub_s) and math.isfinite(h)):
        raise DomainError("decide needs finite inputs")
    return Decision.HANDOVER if s1 - 2.0 * ub_s >= h else Decision.STAY


def estimate(m_r: float, m_s: Sequence[float], g_w_ref: float, g_w_tra: float, g_ue: Sequence[float],
             l_min: float, l_max: float) -> BoundEstimate:
    s1, s2 = slot_aggregates(m_r, m_s, g_w_ref, g_w_tra, g_ue)
    lb, ub, consistent = bound_xs(s2, l_min, l_max)
    est = BoundEstimate(s1, s2, lb, ub, s1 - 2.0 * ub, consistent)
    if not consistent:
        logger.warning("inconsistent slot-2 measurements: lb_s %.2f > ub_s %.2f", lb, ub)
    else:
        logger.debug("bound estimate: S1 %.2f, X_s in [%.2f, %.2f], delta_min %.2f",
                     s1, lb, ub, est.delta_min)
    return est

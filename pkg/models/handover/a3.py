import math
from dataclasses import dataclass, replace

from models.errors import DomainError


@dataclass(frozen=True)
class A3Tracker:
    """
    Time-to-trigger bookkeeping for the A3 event M_n > M_s + h.

    condition_since is None exactly when the condition was false at the last update.
    """
    h: float = 10.0
    ttt: int = 150
    condition_since: int | None = None
    last_t: int | None = None

    def seeded(self, t: int) -> "A3Tracker":
        """Tracker whose condition is taken to hold since `t`."""
        return replace(self, condition_since=int(t), last_t=int(t))


def a3_condition(m_n: float, m_s: float, h: float) -> bool:
    if math.isnan(m_n) or math.isnan(m_s) or not math.isfinite(m_n):
        return False
    return m_n > m_s + h


def a3_update(tracker: A3Tracker, m_n: float, m_s: float, t: int) -> tuple[A3Tracker, bool]:
    """Feed one (M_n, M_s) sample; returns the new tracker and whether A3 triggered at `t`."""
    t = int(t)
    if tracker.last_t is not None and t < tracker.last_t:
        raise DomainError(f"A3 samples must not go back in time ({t} < {tracker.last_t})")
    if not a3_condition(m_n, m_s, tracker.h):
        return replace(tracker, condition_since=None, last_t=t), False
    since = t if tracker.condition_since is None else tracker.condition_since
    return replace(tracker, condition_since=since, last_t=t), t - since >= tracker.ttt

"""Abstract data plane: Shannon-capped goodput and a logistic block error curve."""
import math
from enum import Enum


class LinkState(str, Enum):
    ACTIVE = "active"
    DEGRADED = "degraded"
    INTERRUPTED = "interrupted"
    OUTAGE = "outage"


def goodput_model(sinr_db: float, bandwidth_hz: float = 100e6, state: LinkState = LinkState.ACTIVE,
                  efficiency: float = 0.6, degrade_factor: float = 0.5) -> float:
    """Goodput in Mb/s."""
    state = LinkState(state)
    if state in (LinkState.OUTAGE, LinkState.INTERRUPTED) or not math.isfinite(sinr_db):
        return 0.0
    rate = efficiency * bandwidth_hz * math.log2(1.0 + 10.0 ** (sinr_db / 10.0)) / 1e6
    return rate * degrade_factor if state is LinkState.DEGRADED else rate


def block_bits(sinr_db: float, bandwidth_hz: float, efficiency: float, factor: float = 1.0,
               tick_ms: float = 1.0) -> float:
    """Bits of the block sent in one tick at `sinr_db`, scaled by `factor`."""
    return goodput_model(sinr_db, bandwidth_hz, LinkState.ACTIVE, efficiency) * 1e3 * tick_ms * factor


def per_model(sinr_db: float, mid_db: float = 3.0, slope_db: float = 1.5) -> float:
    """Block error probability, logistic in SINR."""
    if math.isnan(sinr_db) or sinr_db == -math.inf:
        return 1.0
    if sinr_db == math.inf:
        return 0.0
    x = (sinr_db - mid_db) / slope_db
    if x > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(x))

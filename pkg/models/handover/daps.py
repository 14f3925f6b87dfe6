"""
Receive side of a dual active protocol stack: duplicate removal and in-order release
across the serving and target links during make-before-break.
"""
from dataclasses import dataclass, field

from models.errors import DomainError

REORDER_WINDOW_MS = 100


@dataclass
class DapsBuffer:
    window_ms: int = REORDER_WINDOW_MS
    received: dict[int, set[int]] = field(default_factory=dict)
    watermark: int = -1  # every seq <= watermark is delivered or given up
    pending: dict[int, int] = field(default_factory=dict)  # seq -> first arrival
    duplicates: int = 0
    skipped: list[int] = field(default_factory=list)
    delivered: int = 0


def _release(buffer: DapsBuffer) -> list[int]:
    out = []
    while buffer.watermark + 1 in buffer.pending:
        buffer.watermark += 1
        del buffer.pending[buffer.watermark]
        out.append(buffer.watermark)
    buffer.delivered += len(out)
    return out


def _skip_to(buffer: DapsBuffer, seq: int) -> None:
    buffer.skipped.extend(range(buffer.watermark + 1, seq))
    buffer.watermark = seq - 1


def daps_expire(buffer: DapsBuffer, t: int) -> list[int]:
    """Give up on holes whose successors have waited a full reordering window."""
    out = _release(buffer)
    while buffer.pending:
        nxt = min(buffer.pending)
        if t - buffer.pending[nxt] < buffer.window_ms:
            break
        _skip_to(buffer, nxt)
        out += _release(buffer)
    return out


def daps_deliver(buffer: DapsBuffer, link_id: int, seq: int, t: int) -> list[int]:
    """Accept one copy of `seq` from `link_id`; returns the sequence numbers released at `t`."""
    if seq < 0:
        raise DomainError(f"sequence numbers are non-negative, got {seq}")
    buffer.received.setdefault(link_id, set()).add(seq)
    if seq <= buffer.watermark or seq in buffer.pending:
        buffer.duplicates += 1
    else:
        buffer.pending[seq] = int(t)
    return daps_expire(buffer, t)


def daps_flush(buffer: DapsBuffer) -> list[int]:
    """Release everything still held, skipping holes."""
    out = []
    while buffer.pending:
        _skip_to(buffer, min(buffer.pending))
        out += _release(buffer)
    return out

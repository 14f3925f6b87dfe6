import math

import numpy as np

from models.channel import Pose
from models.errors import DomainError
from models.sim.scenario import Trajectory


def mobility_step(trajectory: Trajectory, t_ms: float) -> Pose:
    """
    Vehicle pose at `t_ms`: piecewise-linear along the waypoints at constant speed, heading
    along the current segment. After the last waypoint the vehicle stands still.
    """
    if not 0 <= t_ms <= trajectory.duration_ms:
        raise DomainError(f"t={t_ms} ms outside [0, {trajectory.duration_ms}] ms")
    pts = np.asarray(trajectory.waypoints, dtype=float)
    lengths = trajectory.segment_lengths
    if lengths.size == 0 or lengths.sum() == 0:
        return Pose(float(pts[0, 0]), float(pts[0, 1]), trajectory.heading)

    travelled = min(trajectory.speed_mps * t_ms / 1000.0, float(lengths.sum()))
    ends = np.cumsum(lengths)
    seg = int(np.searchsorted(ends, travelled, side="left"))
    seg = min(seg, lengths.size - 1)
    # skip zero-length segments so the heading stays defined
    while lengths[seg] == 0 and seg > 0:
        seg -= 1
    start = ends[seg] - lengths[seg]
    frac = 0.0 if lengths[seg] == 0 else (travelled - start) / lengths[seg]
    a, b = pts[seg], pts[seg + 1]
    pos = a + frac * (b - a)
    heading = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0]))
    return Pose(float(pos[0]), float(pos[1]), heading)

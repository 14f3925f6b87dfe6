"""
Scenario description for one simulation run; built by data/scenario_config.py from TOML.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from models.channel import LinkBudgetParams, NodeGeometry, NoiseModel, loss_bounds
from models.codebook import GaSettings
from models.errors import DomainError
from models.handover.state_machine import HoParams, Protocol
from models.surface_model import SurfaceGeometry

FAST_GA = GaSettings(population=16, generations=15, lattice_step=0.5)

DATA_START_MS = 80


@dataclass(frozen=True)
class Trajectory:
    """Waypoints (world frame, m) driven at constant speed; the vehicle stops at the last one."""
    waypoints: tuple[tuple[float, float], ...]
    speed_kmh: float
    duration_s: float | None = None
    heading: float = 0.0

    def __post_init__(self):
        pts = tuple(tuple(float(v) for v in p) for p in self.waypoints)
        if not pts:
            raise DomainError("trajectory needs at least one waypoint")
        if any(len(p) != 2 for p in pts):
            raise DomainError("waypoints are (x, y) pairs")
        if not self.speed_kmh > 0:
            raise DomainError(f"speed must be positive, got {self.speed_kmh} km/h")
        object.__setattr__(self, "waypoints", pts)
        duration = self.traversal_s if self.duration_s is None else float(self.duration_s)
        if not duration > 0:
            raise DomainError("a trajectory without travel needs an explicit positive duration")
        object.__setattr__(self, "duration_s", duration)

    @property
    def speed_mps(self) -> float:
        return self.speed_kmh / 3.6

    @property
    def segment_lengths(self) -> np.ndarray:
        pts = np.asarray(self.waypoints)
        return np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)

    @property
    def length_m(self) -> float:
        return float(self.segment_lengths.sum())

    @property
    def traversal_s(self) -> float:
        return self.length_m / self.speed_mps

    @property
    def duration_ms(self) -> int:
        return int(round(self.duration_s * 1000.0))


@dataclass(frozen=True)
class TimingParams:
    ssb_period_ms: int = 20
    ssb_burst_ms: int = 5
    mr_period_ms: int = 160
    reconfig_ms: float = 0.2

    def __post_init__(self):
        if not 0 < self.ssb_burst_ms <= self.ssb_period_ms:
            raise DomainError("SSB burst must be positive and fit in the SSB period")
        if self.mr_period_ms < 1 or not 0 <= self.reconfig_ms < 1:
            raise DomainError("MR period must be >= 1 ms and reconfiguration below one tick")


@dataclass(frozen=True)
class ProtocolParams:
    protocol: Protocol = Protocol.WS
    h_db: float = 10.0
    ttt_ms: int = 150
    scan_blackout_ms: int = 20
    degrade_ms: int = 50
    degrade_factor: float = 0.5
    rach_ms: int = 40
    xn_ms: int = 5
    reorder_window_ms: int = 100
    ping_pong_ms: int = 1000
    rlf_ms: int = 100
    d_min_m: float = 0.3
    d_max_m: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if not 0 < self.d_min_m <= self.d_max_m:
            raise DomainError("in-vehicle distance bounds need 0 < d_min <= d_max")
        if self.h_db < 0 or self.ttt_ms < 0:
            raise DomainError("hysteresis and time-to-trigger must be non-negative")


@dataclass(frozen=True)
class LinkParams:
    budget: LinkBudgetParams = LinkBudgetParams()
    bandwidth_hz: float = 100e6
    efficiency: float = 0.6
    outage_sinr_db: float = -5.0
    per_mid_db: float = 3.0
    per_slope_db: float = 1.5
    base_rtt_ms: float = 10.0
    packet_bits: int = 12_000
    retx_penalty_ms: float = 20.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0 or not 0 < self.efficiency <= 1:
            raise DomainError("bandwidth must be positive and efficiency in (0, 1]")
        if not self.per_slope_db > 0:
            raise DomainError("PER slope must be positive")


@dataclass(frozen=True)
class NoiseParams:
    sigma_db: float = 2.0
    coherence_ms: int = 10


@dataclass(frozen=True)
class SurfaceParams:
    n_elements: int = 8
    element_spacing: float = 0.5
    carrier_ghz: float = 26.0
    codebook: str | None = None
    atom_grid: str | None = None
    seed: int = 0
    ga: GaSettings = FAST_GA

    @property
    def geometry(self) -> SurfaceGeometry:
        return SurfaceGeometry(self.n_elements, self.element_spacing, self.carrier_ghz)


@dataclass(frozen=True)
class ReplayParams:
    mode: str = "synthetic"
    trace: str | None = None
    calibrate: bool = False
    calibration_db: float = 10.0

    def __post_init__(self):
        if self.mode not in ("synthetic", "trace-replay"):
            raise DomainError(f"replay mode must be 'synthetic' or 'trace-replay', got '{self.mode}'")
        if self.mode == "trace-replay" and not self.trace:
            raise DomainError("trace-replay mode needs a trace path")


@dataclass(frozen=True)
class OutputParams:
    name: str = "scenario"
    dir: str | None = None
    window_ms: int = 100


@dataclass(frozen=True)
class Scenario:
    geometry: NodeGeometry
    trajectory: Trajectory
    seed: int = 0
    timing: TimingParams = TimingParams()
    protocol: ProtocolParams = ProtocolParams()
    link: LinkParams = LinkParams()
    noise: NoiseParams = NoiseParams()
    surface: SurfaceParams = SurfaceParams()
    replay: ReplayParams = ReplayParams()
    output: OutputParams = OutputParams()
    defaults_applied: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        carriers = [g.carrier_ghz for g in self.geometry.gnbs]
        if len(set(carriers)) != len(carriers):
            raise DomainError("gNBs must broadcast on distinct carriers")
        if self.geometry.surface != self.surface.geometry:
            raise DomainError("node geometry and surface section describe different surfaces")
        if self.duration_ms <= DATA_START_MS:
            raise DomainError(f"duration must exceed the {DATA_START_MS} ms attachment phase")

    @property
    def name(self) -> str:
        return self.output.name

    @property
    def duration_ms(self) -> int:
        return self.trajectory.duration_ms

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.noise.sigma_db, self.seed, self.noise.coherence_ms)

    def ho_params(self) -> HoParams:
        p, tm = self.protocol, self.timing
        l_min, l_max = loss_bounds(p.d_min_m, p.d_max_m, self.surface.carrier_ghz)
        return HoParams(h_db=p.h_db, ttt_ms=p.ttt_ms, mr_period_ms=tm.mr_period_ms,
                        scan_blackout_ms=p.scan_blackout_ms, degrade_ms=p.degrade_ms,
                        degrade_factor=p.degrade_factor, rach_ms=p.rach_ms, burst_ms=tm.ssb_burst_ms,
                        xn_ms=p.xn_ms, l_min=l_min, l_max=l_max)

    def with_protocol(self, protocol: Protocol) -> "Scenario":
        return replace(self, protocol=replace(self.protocol, protocol=Protocol(protocol)))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    def mr_instants(self) -> list[int]:
        period = self.timing.mr_period_ms
        return list(range(DATA_START_MS + period, self.duration_ms, period))


def window_bounds(duration_ms: int, window_ms: int) -> list[tuple[int, int]]:
    n = math.ceil(duration_ms / window_ms)
    return [(k * window_ms, min((k + 1) * window_ms, duration_ms)) for k in range(n)]

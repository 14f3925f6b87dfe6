from models.sim.engine import SimEngine, compare, run
from models.sim.metrics import Metrics, delivered_sequence, metrics_from_trace, percentile
from models.sim.mobility import mobility_step
from models.sim.scenario import (LinkParams, NoiseParams, OutputParams, ProtocolParams, ReplayParams, Scenario,
                                 SurfaceParams, TimingParams, Trajectory)

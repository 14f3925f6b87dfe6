from dataclasses import replace
from pathlib import Path

import pytest

from data.scenario_config import parse_config
from models.handover.state_machine import Protocol
from models.sim.engine import compare
from models.sim.planning import resolve_codebook
from models.sim.scenario import FAST_GA
from models.surface_model import SurfaceGeometry

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = REPO_ROOT / "data" / "scenarios"


def load_scenario(name: str, duration_s: float | None = None):
    scenario = parse_config(SCENARIOS / f"{name}.toml")
    if duration_s is not None:
        scenario = replace(scenario, trajectory=replace(scenario.trajectory, duration_s=duration_s))
    return scenario


@pytest.fixture
def small_geometry():
    return SurfaceGeometry(n_elements=8)


@pytest.fixture
def fast_ga():
    return FAST_GA


@pytest.fixture(scope="session")
def static_scenario():
    return load_scenario("static")


@pytest.fixture(scope="session")
def static_codebook(static_scenario):
    return resolve_codebook(static_scenario.with_protocol(Protocol.WS))


@pytest.fixture(scope="session")
def crossover_scenario():
    return load_scenario("crossover")


@pytest.fixture(scope="session")
def crossover_codebook(crossover_scenario):
    return resolve_codebook(crossover_scenario.with_protocol(Protocol.WS))


@pytest.fixture(scope="session")
def crossover_arms(crossover_scenario, crossover_codebook):
    arms, deltas = compare(crossover_scenario, [Protocol.SA, Protocol.WS], crossover_codebook)
    return arms, deltas

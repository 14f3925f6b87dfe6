import math

import pytest

from models.sim.goodput import LinkState, block_bits, goodput_model, per_model


def test_shannon_goodput():
    assert goodput_model(0.0) == pytest.approx(60.0)
    assert goodput_model(0.0, state=LinkState.DEGRADED) == pytest.approx(30.0)
    assert goodput_model(20.0, state=LinkState.INTERRUPTED) == 0.0
    assert goodput_model(20.0, state=LinkState.OUTAGE) == 0.0
    assert goodput_model(-math.inf) == 0.0


def test_block_bits_per_tick():
    assert block_bits(0.0, 100e6, 0.6) == pytest.approx(60_000.0)
    assert block_bits(0.0, 100e6, 0.6, factor=0.5) == pytest.approx(30_000.0)


def test_per_curve():
    assert per_model(3.0) == pytest.approx(0.5)
    assert per_model(-math.inf) == 1.0
    assert per_model(math.nan) == 1.0
    assert per_model(math.inf) == 0.0
    assert per_model(2000.0) == 0.0
    values = [per_model(s) for s in range(-10, 30, 2)]
    assert all(a > b for a, b in zip(values, values[1:]))

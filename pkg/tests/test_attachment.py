import math

import numpy as np
import pytest

from models.codebook import Codebook, CodebookKey, synth_hard_partition
from models.errors import ConfigError, DomainError
from models.handover.attachment import (best_of_cube, best_scan_sample, elapsed_ms, initial_attachment,
                                        neighbor_scan, select_serving)
from models.surface_model import SurfaceGeometry


def test_initial_attachment_finds_the_strongest_triple():
    att = initial_attachment(lambda g, s, u: -100.0 + g - abs(s - 3) - 2 * u)
    assert att.best == (7, 3, 0)
    assert att.rsrp == pytest.approx(-93.0)
    assert att.elapsed_ms == elapsed_ms() == 80


def test_attachment_matches_exhaustive_search_on_random_cubes():
    rng = np.random.default_rng(41)
    for _ in range(100):
        cube = rng.normal(-90.0, 10.0, (8, 8, 4))
        att = initial_attachment(lambda g, s, u: cube[g, s, u])
        assert att.best == tuple(int(i) for i in np.unravel_index(np.argmax(cube), cube.shape))
        assert att.rsrp == cube.max()
        assert att.elapsed_ms == 80


def test_ties_go_to_the_lowest_indices():
    assert best_of_cube(np.zeros((2, 2, 2))).best == (0, 0, 0)


def test_nan_and_inf_cells_are_ignored():
    cube = np.full((2, 2, 2), np.nan)
    assert best_of_cube(cube).failed
    cube[1, 0, 1] = -80.0
    assert best_of_cube(cube).best == (1, 0, 1)
    with pytest.raises(DomainError):
        best_of_cube(np.zeros((2, 2)))


def test_group_selection_maximizes_the_worst_ue():
    a = np.full((2, 2, 2), -90.0)
    b = np.full((2, 2, 2), -90.0)
    a[0, 0, 1] = -60.0  # great for UE 0 only
    a[1, 1, 0], b[1, 1, 1] = -70.0, -72.0
    sel = select_serving({0: {0: a, 1: b}})
    assert (sel.gnb_id, sel.gnb_beam, sel.surface_index) == (0, 1, 1)
    assert sel.ue_beams == {0: 0, 1: 1}
    assert sel.rsrp == pytest.approx(-72.0)


def test_group_selection_prefers_lowest_gnb_on_ties_and_skips_dead_gnbs():
    cube = np.full((1, 1, 1), -70.0)
    dead = np.full((1, 1, 1), -np.inf)
    assert select_serving({1: {0: cube}, 0: {0: cube.copy()}}).gnb_id == 0
    assert select_serving({0: {0: dead}, 1: {0: cube}}).gnb_id == 1
    assert select_serving({0: {0: dead}}) is None


@pytest.fixture
def scan_codebook():
    geo = SurfaceGeometry(8)
    cb = Codebook(geo)
    for r in (20.0, 25.0, 30.0):
        cb.add(synth_hard_partition(CodebookKey(0.0, r, 0.75), geo))
    return cb


def test_neighbor_scan_measures_in_order(scan_codebook):
    seen = []

    def oracle(theta_r, entry):
        seen.append(entry.key.theta_r)
        return -50.0 - abs(theta_r - 25.0)

    samples = neighbor_scan(0.0, scan_codebook, oracle, [30.0, 20.0, 25.0])
    assert seen == [30.0, 20.0, 25.0]
    assert samples == [(30.0, -55.0), (20.0, -55.0), (25.0, -50.0)]
    assert best_scan_sample(samples) == (2, 25.0, -50.0)


def test_neighbor_scan_fails_before_measuring_on_missing_key(scan_codebook):
    calls = []
    with pytest.raises(ConfigError):
        neighbor_scan(0.0, scan_codebook, lambda r, e: calls.append(r) or 0.0, [20.0, 35.0])
    assert calls == []


def test_best_scan_sample_ignores_outage():
    assert best_scan_sample([(0.0, -math.inf), (5.0, math.nan)]) is None
    assert best_scan_sample([(0.0, -60.0), (5.0, -60.0)]) == (0, 0.0, -60.0)

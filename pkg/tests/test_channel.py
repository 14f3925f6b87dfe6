import math

import numpy as np
import pytest

from models.channel import (GnbSite, LinkBudgetParams, NodeGeometry, NoiseModel, PathKind, Pose, UeSite, Zone,
                            coverage_map, fspl, incident_angle, link_aggregate, link_budget_terms, loss_bounds,
                            reflect_offset_db, reflected_snr_db, rsrp, snr_gnb, snr_ue, ue_angle, ue_terms,
                            zone_at)
from models.errors import DomainError
from models.surface_model import Side, SurfaceConfig, SurfaceMode, gain_at


@pytest.fixture
def geometry():
    gnbs = (GnbSite(0, (-1.5, 10.9)), GnbSite(1, (8.5, 10.9), carrier_ghz=26.2), GnbSite(2, (0.0, -20.0),
                                                                                        carrier_ghz=26.4))
    ues = (UeSite(0, (-1.5, 0.0), zone="rear"), UeSite(1, (-2.0, 0.0), zone="cargo"))
    zones = (Zone("rear", 20.0, (-1.5, 0.0, -0.9, 0.9)), Zone("cargo", None, (-2.25, -1.5, -0.9, 0.9)))
    return NodeGeometry(gnbs, ues, zones=zones)


def test_fspl_reference_values():
    assert fspl(150.0, 26.0) == pytest.approx(104.27, abs=0.05)
    assert fspl(20.0, 26.0) - fspl(10.0, 26.0) == pytest.approx(20.0 * math.log10(2.0))
    with pytest.raises(DomainError):
        fspl(0.0, 26.0)


def test_link_budget_totals():
    params = LinkBudgetParams()
    assert snr_ue(params) == pytest.approx(27.0)
    assert snr_gnb(params) == pytest.approx(14.5)
    names = [n for n, _ in link_budget_terms(params, "ue")]
    assert names[0] == "P_gNB" and names[-1] == "-P_nf"
    with pytest.raises(DomainError):
        link_budget_terms(params, "uplink")
    with pytest.raises(DomainError):
        LinkBudgetParams(l_ue=-1.0)


def test_loss_bounds_are_signed():
    l_min, l_max = loss_bounds(0.3, 1.0, 26.0)
    assert l_min == pytest.approx(-fspl(1.0, 26.0))
    assert l_max == pytest.approx(-fspl(0.3, 26.0))
    assert l_min < l_max < 0
    with pytest.raises(DomainError):
        loss_bounds(1.0, 0.3, 26.0)


def test_geometry_validation():
    g = GnbSite(0, (0.0, 10.0))
    with pytest.raises(DomainError):
        NodeGeometry((g, GnbSite(0, (5.0, 10.0))), ())
    with pytest.raises(DomainError):
        NodeGeometry((g,), (UeSite(0, (5.0, 0.0)),))
    with pytest.raises(DomainError):
        NodeGeometry((g,), (UeSite(0, (0.0, 0.0), zone="trunk"),))


def test_angles(geometry):
    assert incident_angle(geometry, 0) == pytest.approx(0.0, abs=1e-9)
    assert incident_angle(geometry, 1) == pytest.approx(-45.0)
    assert incident_angle(geometry, 2) is None
    assert ue_angle(geometry, 0) == pytest.approx(0.0, abs=1e-9)
    turned = geometry.with_pose(Pose(3.0, 1.0, 0.0))
    assert incident_angle(turned, 0) != pytest.approx(0.0)


def test_direct_path_and_blocked_zone(geometry):
    budget = LinkBudgetParams()
    open_ = rsrp(geometry, budget, None, PathKind.DIRECT, 0, None, 0, 0)
    blocked = rsrp(geometry, budget, None, PathKind.DIRECT, 1, None, 0, 0)
    assert math.isfinite(open_.value) and open_.beam_ids.gnb_beam is not None
    assert blocked.outage and blocked.value == -math.inf


def test_transmissive_path_composition(geometry):
    budget = LinkBudgetParams()
    off = SurfaceConfig.off(8)
    sample = rsrp(geometry, budget, off, PathKind.TRANSMISSIVE, 0, None, 0, 0)
    g_ue, l_ue = ue_terms(geometry, 0)
    expected = link_aggregate(geometry, budget, 0) + gain_at(off, geometry.surface, 0.0, Side.TRANSMISSIVE, 0.0) \
        + g_ue + l_ue
    assert sample.value == pytest.approx(expected)
    assert rsrp(geometry, budget, None, PathKind.TRANSMISSIVE, 0, None, 0, 2).outage


def test_reflective_path_needs_serving(geometry):
    budget = LinkBudgetParams()
    with pytest.raises(DomainError):
        rsrp(geometry, budget, None, PathKind.REFLECTIVE, None, None, 0, 1)
    sample = rsrp(geometry, budget, None, PathKind.REFLECTIVE, None, None, 0, 1, serving_id=0)
    assert math.isfinite(sample.value) and sample.ue_id is None


@pytest.mark.parametrize("mode", [SurfaceMode.SINGLE_TRANSMISSIVE, SurfaceMode.DUAL_TRANSMISSIVE])
def test_reflective_path_needs_a_reflective_beam(geometry, mode):
    budget = LinkBudgetParams()
    config = SurfaceConfig(np.full((8, 2), 8.0), mode)
    with pytest.raises(DomainError, match="no reflective beam"):
        rsrp(geometry, budget, config, PathKind.REFLECTIVE, None, None, 0, 1, serving_id=0)
    for ok in (SurfaceMode.DUAL_TRANSFLECTIVE, SurfaceMode.SINGLE_REFLECTIVE):
        sample = rsrp(geometry, budget, SurfaceConfig(np.full((8, 2), 8.0), ok), PathKind.REFLECTIVE,
                      None, None, 0, 1, serving_id=0)
        assert sample.ue_id is None


def test_reflected_snr_uses_calibration_offset(geometry):
    budget = LinkBudgetParams()
    assert reflect_offset_db(geometry, budget, 0) == pytest.approx(60.0 + 24.0 + 24.0 - 29.5)
    assert reflected_snr_db(0.0, geometry, budget, 0) == pytest.approx(-78.5 + 89.0)


def test_noise_is_keyed_not_ordered():
    noise = NoiseModel(sigma_db=2.0, seed=4, coherence_ms=10)
    a = noise.sample(0, 1, PathKind.DIRECT, None, 12)
    noise.sample(1, 0, PathKind.REFLECTIVE, 0, 3)
    assert noise.sample(0, 1, PathKind.DIRECT, None, 19) == a
    assert noise.sample(0, 1, PathKind.DIRECT, None, 20) != a
    assert NoiseModel(0.0).sample(0, 1, PathKind.DIRECT, None, 5) == 0.0
    with pytest.raises(DomainError):
        NoiseModel(sigma_db=-1.0)


def test_noise_statistics():
    noise = NoiseModel(sigma_db=3.0, seed=11, coherence_ms=1)
    draws = np.array([noise.sample(0, 0, PathKind.DIRECT, None, t) for t in range(4000)])
    assert abs(draws.mean()) < 0.2
    assert draws.std() == pytest.approx(3.0, rel=0.1)


def test_zone_lookup_and_coverage(geometry):
    assert zone_at(geometry, -2.0, 0.0).name == "cargo"
    assert zone_at(geometry, 1.0, 0.0) is None
    cov = coverage_map(geometry, LinkBudgetParams(), None, 0, [-2.0, -1.0], [0.0])
    assert list(cov.columns) == ["x", "y", "zone", "direct_dbm", "surface_dbm"]
    cargo = cov[cov["zone"] == "cargo"].iloc[0]
    assert cargo["direct_dbm"] == -math.inf
    assert math.isfinite(cargo["surface_dbm"])

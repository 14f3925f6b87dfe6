import numpy as np
import pytest

from models.errors import DomainError
from models.handover.bounding import Decision, bound_xs, decide, estimate, slot_aggregates

L_MIN, L_MAX = -60.0, -50.0


def test_slot_aggregates_remove_known_gains():
    s1, s2 = slot_aggregates(-40.0, [-70.0, -72.0], -3.0, -1.0, [8.0, 6.0])
    assert s1 == pytest.approx(-37.0)
    assert s2 == pytest.approx((-77.0, -77.0))
    with pytest.raises(DomainError):
        slot_aggregates(-40.0, [], -3.0, -1.0, [])
    with pytest.raises(DomainError):
        slot_aggregates(-40.0, [-70.0], -3.0, -1.0, [8.0, 6.0])


def test_bounds_contain_the_truth_and_delta_min_is_conservative():
    rng = np.random.default_rng(17)
    for _ in range(200):
        x_s, x_n = rng.uniform(-30, 30, 2)
        n_ue = int(rng.integers(1, 5))
        l_ue = rng.uniform(L_MIN, L_MAX, n_ue)
        s2 = x_s + l_ue
        lb, ub, consistent = bound_xs(s2, L_MIN, L_MAX)
        assert consistent
        assert lb <= x_s + 1e-9 and x_s <= ub + 1e-9
        assert (x_n + x_s) - 2.0 * ub <= (x_n - x_s) + 1e-9


def test_more_ues_tighten_the_interval():
    lb1, ub1, _ = bound_xs([-55.0], L_MIN, L_MAX)
    lb2, ub2, _ = bound_xs([-55.0, -52.0], L_MIN, L_MAX)
    assert ub2 - lb2 <= ub1 - lb1


def test_inconsistent_measurements_are_reported_not_clamped():
    lb, ub, consistent = bound_xs([-50.0, -65.0], L_MIN, L_MAX)
    assert not consistent and lb > ub
    with pytest.raises(DomainError):
        bound_xs([-50.0], L_MAX, L_MIN)
    with pytest.raises(DomainError):
        bound_xs([], L_MIN, L_MAX)


def test_decision_threshold():
    assert decide(30.0, 10.0, 10.0) is Decision.HANDOVER
    assert decide(29.9, 10.0, 10.0) is Decision.STAY
    with pytest.raises(DomainError):
        decide(float("inf"), 10.0, 10.0)


def test_estimate():
    est = estimate(30.0, [-55.0], 0.0, 0.0, [0.0], L_MIN, L_MAX)
    assert (est.lb_s, est.ub_s) == pytest.approx((-5.0, 5.0))
    assert est.delta_min == pytest.approx(20.0)
    assert est.consistent


def test_handover_is_only_decided_when_the_neighbor_truly_wins():
    rng = np.random.default_rng(29)
    h = 3.0
    decided = 0
    for _ in range(10_000):
        x_s, x_n = rng.uniform(-30, 30, 2)
        n_ue = int(rng.integers(1, 6))
        l_ue = rng.uniform(L_MIN, L_MAX, n_ue)
        s1, s2 = x_n + x_s, x_s + l_ue
        lb, ub, consistent = bound_xs(s2, L_MIN, L_MAX)
        assert consistent and lb - 1e-9 <= x_s <= ub + 1e-9

        # one more UE never widens the interval
        lb_more, ub_more, _ = bound_xs(np.append(s2, x_s + rng.uniform(L_MIN, L_MAX)), L_MIN, L_MAX)
        assert lb <= lb_more + 1e-12 and ub_more <= ub + 1e-12

        if decide(s1, ub, h) is Decision.HANDOVER:
            decided += 1
            assert x_n - x_s >= h - 1e-9
    assert decided > 0

import numpy as np
import pytest

from cwss.detect import (
    TrialOutcome,
    aggregate_report,
    decide_occupancy,
    detection_event,
    false_alarm_event,
    wilson_interval,
)
from cwss.model import default_paper_plan, generate_scene


@pytest.fixture
def plan():
    return default_paper_plan(64)


@pytest.fixture
def scene(plan):
    return generate_scene(plan, 5, 10.0, seed=3)


def test_threshold_rule_single_band(plan):
    p = np.zeros(plan.grid_size)
    p[plan.bins_for(2)] = 1.0
    decision = decide_occupancy(p, plan, rule="threshold", tau=1.0)
    expected = np.array([q == 2 for q in plan.subband_ids])
    assert np.array_equal(decision.occupied, expected)


def test_threshold_rule_zero_estimate(plan):
    decision = decide_occupancy(np.zeros(plan.grid_size), plan, rule="threshold")
    assert not decision.occupied.any()


def test_threshold_rule_recovers_truth(scene):
    # with the exact PSD any tau below the weakest band's lift works
    plan = scene.plan
    global_mean = scene.true_psd.mean()
    weakest = min(scene.true_psd[plan.bins_for(q)].mean() for q in scene.active_ids)
    tau = 0.5 * weakest / global_mean
    decision = decide_occupancy(scene.true_psd, plan, rule="threshold", tau=tau)
    expected = np.array([q in scene.active_ids for q in plan.subband_ids])
    assert np.array_equal(decision.occupied, expected)


def test_ordering_rule_needs_scene(plan):
    with pytest.raises(ValueError):
        decide_occupancy(np.zeros(plan.grid_size), plan, rule="ordering")


def test_ordering_rule_on_truth(scene):
    decision = decide_occupancy(scene.true_psd, scene.plan, rule="ordering", scene=scene)
    expected = np.array([q in scene.active_ids for q in scene.plan.subband_ids])
    assert np.array_equal(decision.occupied, expected)


def test_unknown_rule(plan):
    with pytest.raises(ValueError):
        decide_occupancy(np.zeros(plan.grid_size), plan, rule="nope")


def test_false_alarm_on_truth_is_false(scene):
    for q in scene.inactive_ids:
        assert not false_alarm_event(scene.true_psd, scene, q)


def test_false_alarm_on_raised_bin(scene):
    q = scene.inactive_ids[0]
    p = scene.true_psd.copy()
    p[scene.plan.bins_for(q)[0]] = scene.true_psd[scene.active_bins()].min() * 1.01
    assert false_alarm_event(p, scene, q)


def test_false_alarm_requires_inactive(scene):
    with pytest.raises(ValueError):
        false_alarm_event(scene.true_psd, scene, scene.active_ids[0])


def test_detection_on_truth(scene):
    for q in scene.active_ids:
        assert detection_event(scene.true_psd, scene, q)


def test_detection_zero_estimate_fails(scene):
    assert not detection_event(np.zeros(scene.plan.grid_size), scene, scene.active_ids[0])


def test_detection_requires_active(scene):
    with pytest.raises(ValueError):
        detection_event(scene.true_psd, scene, scene.inactive_ids[0])


def test_ordering_events_scale_invariant(scene):
    rng = np.random.default_rng(0)
    p = np.abs(rng.standard_normal(scene.plan.grid_size))
    q_in = scene.inactive_ids[0]
    q_act = scene.active_ids[0]
    for alpha in (0.01, 1.0, 250.0):
        assert false_alarm_event(p, scene, q_in) == false_alarm_event(alpha * p, scene, q_in)
        assert detection_event(p, scene, q_act) == detection_event(alpha * p, scene, q_act)


def test_events_use_magnitudes(scene):
    q = scene.active_ids[0]
    assert detection_event(-scene.true_psd, scene, q)


def test_aggregate_all_correct():
    outcomes = [TrialOutcome(0, active=True, event=True) for _ in range(5)]
    outcomes += [TrialOutcome(1, active=False, event=False) for _ in range(5)]
    rep = aggregate_report(outcomes, l_trials=10)
    assert rep.p_d[0] == 1.0 and np.isnan(rep.p_f[0])
    assert rep.p_f[1] == 0.0 and np.isnan(rep.p_d[1])


def test_aggregate_all_inverted():
    outcomes = [TrialOutcome(0, active=True, event=False) for _ in range(4)]
    outcomes += [TrialOutcome(0, active=False, event=True) for _ in range(4)]
    rep = aggregate_report(outcomes, l_trials=8)
    assert rep.p_d[0] == 0.0
    assert rep.p_f[0] == 1.0


def test_aggregate_counting():
    outcomes = [TrialOutcome(2, active=False, event=(i < 3)) for i in range(10)]
    rep = aggregate_report(outcomes, l_trials=10)
    assert rep.p_f[0] == pytest.approx(0.3)
    assert rep.tm_h1_given_h0[0] == 3
    assert rep.n_h0[0] == 10


def test_aggregate_total_denominator_variant():
    outcomes = [TrialOutcome(0, active=False, event=True) for _ in range(3)]
    outcomes += [TrialOutcome(0, active=True, event=True) for _ in range(7)]
    rep = aggregate_report(outcomes, l_trials=10)
    p_f_cond, p_d_cond = rep.ratios("condition")
    p_f_tot, p_d_tot = rep.ratios("total")
    assert p_f_cond[0] == 1.0 and p_d_cond[0] == 1.0
    assert p_f_tot[0] == pytest.approx(0.3)
    assert p_d_tot[0] == pytest.approx(0.7)


def test_aggregate_requires_trials():
    with pytest.raises(ValueError):
        aggregate_report([], l_trials=0)


def test_report_serialization():
    outcomes = [TrialOutcome(0, active=False, event=True) for _ in range(2)]
    rep = aggregate_report(outcomes, l_trials=2)
    d = rep.to_json_dict()
    assert d["p_d"] == [None]
    assert d["p_f"] == [1.0]
    csv = rep.to_csv()
    assert "subband_id,condition,condition_count,event_count,ratio" in csv
    assert "0,H1,0,0,n/a" in csv


def test_wilson_interval():
    lo, hi = wilson_interval(5, 10)
    assert 0.0 <= lo < 0.5 < hi <= 1.0
    lo0, hi0 = wilson_interval(0, 20)
    assert lo0 == 0.0 and hi0 < 0.2
    assert np.isnan(wilson_interval(0, 0)[0])

"""Bound calculator, Wilson intervals, batch estimation, property checks."""

import json
import math

import numpy as np
import pytest

from deffuant_lab import (Ball, InapplicableBoundError, Norm, OpinionSpace,
                          PointMass, SimParams, TriangularBall, UniformBall,
                          UniformBox, bound_from_distribution,
                          consensus_lower_bound, estimate_consensus, interval,
                          lemma_check_report, wilson_interval)
from deffuant_lab.analysis import (Z_95, EstimateReport, PropertyRecord,
                                   RunRecord, critical_z,
                                   example_triangular_bound,
                                   example_uniform_bound,
                                   record_from_outcome)
from deffuant_lab.dynamics import run
from deffuant_lab.graphs import complete, path


def test_critical_z_pinned_values():
    assert critical_z(0.05) == Z_95 == 1.959964
    assert critical_z(0.01) == pytest.approx(2.5758293035489004, rel=1e-12)
    assert critical_z(0.10) == pytest.approx(1.6448536269514722, rel=1e-9)


def test_wilson_interval_all_successes():
    lo, hi = wilson_interval(100, 100)
    assert hi == 1.0
    assert lo == pytest.approx(0.96304, abs=5e-5)


def test_wilson_interval_no_successes_mirrors_all():
    lo0, hi0 = wilson_interval(0, 100)
    lo1, hi1 = wilson_interval(100, 100)
    assert lo0 == 0.0
    assert hi0 == pytest.approx(1.0 - lo1, abs=1e-12)


def test_wilson_endpoints_solve_score_quadratic():
    """Wilson endpoints are the roots of (phat - p)^2 = z^2 p(1-p)/n.

    Checking the quadratic directly is an oracle independent of the
    closed-form rearrangement used in the implementation.
    """
    z = critical_z(0.05)
    for k, n in ((50, 100), (3, 17), (999, 1000), (1, 1000)):
        phat = k / n
        for p in wilson_interval(k, n):
            if p in (0.0, 1.0) and k not in (0, n):
                continue
            lhs = (phat - p) ** 2
            rhs = z * z * p * (1.0 - p) / n
            assert lhs == pytest.approx(rhs, abs=1e-12), (k, n, p)


def test_wilson_interval_contains_point_estimate():
    for k, n in ((0, 10), (5, 10), (10, 10), (250, 1000)):
        lo, hi = wilson_interval(k, n)
        assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_wilson_interval_narrows_with_n():
    lo1, hi1 = wilson_interval(50, 100)
    lo2, hi2 = wilson_interval(500, 1000)
    assert (hi2 - lo2) < (hi1 - lo1)


def test_wilson_interval_validates():
    with pytest.raises(ValueError):
        wilson_interval(5, 0)
    with pytest.raises(ValueError):
        wilson_interval(11, 10)
    with pytest.raises(ValueError):
        wilson_interval(-1, 10)


def test_example_bounds_hand_computed():
    # interval [0, 1] is the 1-d ball of radius 1/2
    assert example_uniform_bound(1, 0.5, 1.0) == pytest.approx(0.5)
    assert example_uniform_bound(1, 0.5, 0.8) == pytest.approx(1.0 / 6.0, rel=1e-12)
    assert example_uniform_bound(3, 1.0, 2.5) == pytest.approx(0.5)
    assert example_triangular_bound(2, 1.0, 2.5) == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_example_bounds_inapplicable():
    with pytest.raises(InapplicableBoundError):
        example_uniform_bound(1, 0.5, 0.5)
    with pytest.raises(InapplicableBoundError):
        example_triangular_bound(2, 1.0, 0.9)


def test_consensus_lower_bound_matches_examples():
    space = OpinionSpace(Ball(np.zeros(2), 1.0), Norm.l2(2))
    report = consensus_lower_bound(2.5, space, expected_disagreement=2.0 / 3.0)
    assert report.applicable
    assert report.diameter == 2.0
    assert report.clamped_bound == pytest.approx(example_uniform_bound(2, 1.0, 2.5))
    assert report.raw_bound == report.clamped_bound


def test_consensus_lower_bound_clamps_negative():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = consensus_lower_bound(0.6, space, expected_disagreement=0.25)
    assert report.applicable
    assert report.raw_bound == pytest.approx(-1.5)
    assert report.clamped_bound == 0.0


def test_consensus_lower_bound_inapplicable_below_half_diameter():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = consensus_lower_bound(0.5, space, expected_disagreement=0.25)
    assert not report.applicable
    assert report.raw_bound is None
    assert report.clamped_bound is None
    d = report.to_dict()
    json.dumps(d)
    assert d["applicable"] is False


def test_bound_identity_on_grid():
    """clamped == max(0, 1 - E/(tau - D/2)) recomputed independently."""
    space = OpinionSpace(Ball(np.zeros(3), 1.0), Norm.l2(3))
    e = 0.75
    for tau in np.linspace(1.01, 6.0, 50):
        report = consensus_lower_bound(float(tau), space, expected_disagreement=e)
        expected = max(0.0, 1.0 - e / (tau - 1.0))
        assert abs(report.clamped_bound - expected) <= 1e-12 * max(1.0, abs(expected))


def test_bound_from_distribution_analytic_path():
    space = OpinionSpace(Ball(np.zeros(2), 1.0), Norm.l2(2))
    report = bound_from_distribution(2.5, space, UniformBall(space))
    assert report.expected_disagreement == pytest.approx(2.0 / 3.0)
    assert report.expected_disagreement_se is None
    assert report.clamped_bound == pytest.approx(example_uniform_bound(2, 1.0, 2.5))


def test_bound_from_distribution_mc_path():
    box_space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = bound_from_distribution(1.0, box_space, UniformBox(box_space),
                                     rng=np.random.default_rng(0), n_mc=200_000)
    assert report.expected_disagreement_se is not None
    # E|X - 1/2| = 1/4 for uniform on [0, 1]
    assert abs(report.expected_disagreement - 0.25) < 4.0 * report.expected_disagreement_se
    assert report.clamped_bound == pytest.approx(0.5, abs=0.01)


def test_run_record_csv_row():
    rec = RunRecord(run_id=3, seed=12345, classification="consensus",
                    n_classes=1, total_events=42, final_time=1.5,
                    t_star=0.25, event_a=True)
    assert rec.csv_row() == ["3", "12345", "consensus", "1", "42", "1.5", "0.25", "1"]
    rec2 = RunRecord(run_id=0, seed=1, classification="undecided",
                     n_classes=0, total_events=9, final_time=2.0,
                     t_star=None, event_a=None)
    assert rec2.csv_row()[6] == ""
    assert rec2.csv_row()[7] == ""


def test_record_from_outcome_roundtrip():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    out = run(path(2), space, PointMass(space, np.array([0.5])),
              SimParams(tau=0.8), np.random.default_rng(0))
    rec = record_from_outcome(7, 99, out)
    assert rec.run_id == 7
    assert rec.seed == 99
    assert rec.classification == "consensus"
    assert rec.t_star == 0.0
    assert rec.event_a is True


def test_estimate_consensus_counts_and_interval():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = estimate_consensus(complete(5), space, UniformBox(space),
                                SimParams(tau=1.0), n_runs=40, master_seed=11)
    assert report.n_runs == 40
    assert (report.n_consensus + report.n_fragmented + report.n_undecided) == 40
    assert report.point_estimate == report.n_consensus / 40
    assert report.pessimistic_estimate == report.point_estimate
    assert report.wilson_lo <= report.point_estimate <= report.wilson_hi
    # tau equals the diameter, so every pair always interacts: consensus
    assert report.n_consensus == 40
    report.validate()


def test_estimate_consensus_reproducible_across_workers():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    params = SimParams(tau=0.6)
    kwargs = dict(n_runs=24, master_seed=42)
    r1 = estimate_consensus(complete(5), space, UniformBox(space), params,
                            workers=1, **kwargs)
    r4 = estimate_consensus(complete(5), space, UniformBox(space), params,
                            workers=4, **kwargs)
    assert r1.to_dict() == r4.to_dict()
    for a, b in zip(r1.runs, r4.runs):
        assert a == b


def test_estimate_consensus_keep_outcomes():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = estimate_consensus(complete(4), space, UniformBox(space),
                                SimParams(tau=1.0), n_runs=5, master_seed=0,
                                keep_outcomes=True)
    assert len(report.outcomes) == 5
    assert all(o is not None for o in report.outcomes)
    report2 = estimate_consensus(complete(4), space, UniformBox(space),
                                 SimParams(tau=1.0), n_runs=5, master_seed=0)
    assert report2.outcomes is None


def test_estimate_consensus_rejects_zero_runs():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    with pytest.raises(ValueError):
        estimate_consensus(complete(4), space, UniformBox(space),
                           SimParams(tau=1.0), n_runs=0, master_seed=0)


def test_estimate_report_to_dict_json_safe():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = estimate_consensus(complete(4), space, UniformBox(space),
                                SimParams(tau=0.7), n_runs=8, master_seed=5)
    text = json.dumps(report.to_dict(), sort_keys=True)
    assert "wilson" in text


def test_property_record_lines():
    ok = PropertyRecord("sample_check", trials=10, violations=0,
                        worst_margin=1e-15, note="")
    bad = PropertyRecord("sample_check", trials=10, violations=2,
                         worst_margin=0.5, note="broken")
    assert ok.passed and not bad.passed
    assert "PASS" in ok.line()
    assert "FAIL" in bad.line()


def test_lemma_check_report_small():
    """All property checks pass on a reduced workload."""
    from deffuant_lab.graphs import complete as complete_graph
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    specs = [
        (complete_graph(6), space, UniformBox(space), 0.8, 0.5),
        (path(5), space, UniformBox(space), 0.5, 0.4),
    ]
    report = lemma_check_report(n_geometry_trials=2_000, n_traces=4,
                                master_seed=7, trace_specs=specs)
    assert report.passed, report.to_text()
    names = {r.name for r in report.records}
    assert "pair_update_triangle_first" in names
    assert "disagreement_nonincreasing" in names
    assert "certificate_implies_consensus" in names
    text = report.to_text()
    assert text.count("PASS") == len(report.records)


def test_estimate_mean_t_star_and_event_a_frequency():
    space = OpinionSpace(interval(0.0, 1.0), Norm.l2(1))
    report = estimate_consensus(complete(5), space, UniformBox(space),
                                SimParams(tau=1.0), n_runs=10, master_seed=3)
    # tau = diameter: the certificate time is always found and the event holds
    assert report.event_a_frequency == 1.0
    assert report.mean_t_star is not None and report.mean_t_star >= 0.0

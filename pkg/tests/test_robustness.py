import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berndesign import (
    Hybrid,
    MatchedPairs,
    Partition,
    PerturbationSpec,
    PreconditionError,
    Stratified,
    TwoCluster,
    build_hybrid,
    build_matched_pairs,
    closed_form_after,
    inflation_scaling_experiment,
    quadratic_form,
    solve_knapsack,
    worst_case_perturbation,
)
from berndesign.robustness import loglog_slope
from berndesign.solvers import pair_gaps


def test_two_cluster_example():
    design = TwoCluster(Partition.whole((0,), 2, 0.0))
    g, before, after = worst_case_perturbation([0.0, 0.0], PerturbationSpec(1.0, "two_cluster"), design)
    assert (before, after) == (0.0, 1.0)
    # D = 0 tie: the complement is pushed up
    assert g.values.tolist() == [-1.0, 1.0]


def test_stratified_example():
    design = Stratified(MatchedPairs(((0, 1),), 2))
    _, before, after = worst_case_perturbation([0.0, 0.0], PerturbationSpec(1.0, "stratified"), design)
    assert (before, after) == (0.0, 1.0)


def test_kind_mismatch_rejected():
    design = Stratified(MatchedPairs(((0, 1),), 2))
    with pytest.raises(PreconditionError):
        worst_case_perturbation([0.0, 0.0], PerturbationSpec(1.0, "two_cluster"), design)
    with pytest.raises(PreconditionError):
        PerturbationSpec(-1.0, "hybrid")


def designs_for(h):
    return {
        "two_cluster": TwoCluster(solve_knapsack(h)),
        "stratified": Stratified(build_matched_pairs(h)),
        "hybrid": Hybrid(build_hybrid(h, 0.5)),
    }


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5).map(lambda k: 2 * k), st.integers(0, 10_000), st.floats(0.0, 2.0))
def test_worst_case_is_the_maximum_over_the_box(n, seed, eps):
    # a convex quadratic peaks at a vertex of the l-infinity ball
    h = np.random.default_rng(seed).normal(size=n)
    for kind, design in designs_for(h).items():
        _, _, after = worst_case_perturbation(h, PerturbationSpec(eps, kind), design)
        best = max(
            quadratic_form(h + eps * np.array(signs), design)
            for signs in itertools.product((-1.0, 1.0), repeat=n)
        )
        assert after == pytest.approx(best, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 100).map(lambda k: 2 * k), st.integers(0, 10_000), st.floats(0.0, 3.0))
def test_closed_forms_and_bounds(n, seed, eps):
    h = np.random.default_rng(seed).standard_t(3, size=n)
    for kind, design in designs_for(h).items():
        spec = PerturbationSpec(eps, kind)
        g, before, after = worst_case_perturbation(h, spec, design)
        assert np.max(np.abs(g.values - h)) <= eps + 1e-12 * (1 + np.max(np.abs(h)))
        assert after == pytest.approx(closed_form_after(h, spec, design), rel=1e-9, abs=1e-9)
        inflation = after - before
        if kind == "two_cluster":
            assert inflation >= n**2 * eps**2 / 4 * (1 - 1e-12) - 1e-12
        if kind == "stratified":
            exact = n / 2 * eps**2 + eps * float(np.sum(pair_gaps(h)))
            assert inflation == pytest.approx(exact, rel=1e-9, abs=1e-9)
            assert inflation <= n / 2 * eps**2 + eps * (h.max() - h.min()) + 1e-9


def test_zero_radius_changes_nothing():
    h = np.random.default_rng(0).normal(size=12)
    for kind, design in designs_for(h).items():
        _, before, after = worst_case_perturbation(h, PerturbationSpec(0.0, kind), design)
        assert before == after


def test_single_group_hybrid_matches_two_cluster():
    h = np.random.default_rng(1).normal(size=64)
    hybrid = Hybrid(build_hybrid(h, 0.1))
    whole = TwoCluster(hybrid.grouping.groups[0])
    _, b1, a1 = worst_case_perturbation(h, PerturbationSpec(0.1, "hybrid"), hybrid)
    _, b2, a2 = worst_case_perturbation(h, PerturbationSpec(0.1, "two_cluster"), whole)
    assert (b1, a1) == (b2, a2)


def test_scaling_records_and_slopes():
    grid = [64, 128, 256, 512]
    recs = inflation_scaling_experiment(grid, 0.5, 0.01, "symmetric", 1)
    assert len(recs) == 3 * len(grid)
    by_kind = {k: [r["inflation"] for r in recs if r["design"] == k] for k in ("two_cluster", "hybrid")}
    assert loglog_slope(grid, by_kind["two_cluster"]) == pytest.approx(2.0, abs=0.05)
    assert 1.2 < loglog_slope(grid, by_kind["hybrid"]) < 1.8


def test_scaling_experiment_rejects_odd_n():
    with pytest.raises(PreconditionError, match="even"):
        inflation_scaling_experiment([63], 0.5, 0.1, "symmetric", 1)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berndesign import (
    IID,
    AssignmentVector,
    Hybrid,
    HybridGrouping,
    MatchedPairs,
    Mixture,
    OracleVector,
    Partition,
    PreconditionError,
    Stratified,
    TwoCluster,
    hybrid_group_sizes,
    validate_design,
)
from berndesign.core import hybrid_group_count
from berndesign.io import design_from_dict, design_to_dict


def test_well_formed_two_cluster_has_no_violations():
    assert validate_design(TwoCluster(Partition.whole((0, 1), 4, 0.0))) == []


def test_mixture_weights_must_sum_to_one():
    mix = Mixture(np.array([[1, 0], [0, 1]]), np.array([0.6, 0.6]))
    assert validate_design(mix) == ["weights sum to 1.2"]


def test_matched_pairs_coverage_messages():
    pairs = MatchedPairs(((0, 1), (1, 2)), 4)
    assert validate_design(Stratified(pairs)) == ["index 2 appears twice", "index 4 missing"]


def test_mixture_marginal_check():
    mix = Mixture(np.array([[1, 1], [0, 1]]), np.array([0.5, 0.5]))
    assert validate_design(mix) == ["index 2 has treatment probability 1, not 1/2"]


def test_oracle_vector_rejects_bad_input():
    with pytest.raises(PreconditionError):
        OracleVector([])
    with pytest.raises(PreconditionError):
        OracleVector([1.0, float("nan")])


def test_oracle_vector_is_read_only():
    g = OracleVector([1.0, 2.0])
    with pytest.raises(ValueError):
        g.values[0] = 5.0


def test_assignment_vector_binary():
    with pytest.raises(PreconditionError):
        AssignmentVector([0, 2])
    assert AssignmentVector([1, 0]).flipped() == AssignmentVector([0, 1])


@pytest.mark.parametrize(
    "n, expected",
    [(50, [8, 8, 8, 8, 6, 6, 6]), (4, [2, 2])],
)
def test_hybrid_group_sizes(n, expected):
    assert hybrid_group_sizes(n, 0.5) == expected


def test_hybrid_single_group_for_small_alpha():
    assert hybrid_group_sizes(64, 0.1) == [64]


def test_hybrid_group_count_exact_powers():
    # floor(n**alpha) must not lose a group to rounding: 4096**0.5 = 64, 1000**(1/3) = 10
    assert hybrid_group_count(4096, 0.5) == 64
    assert hybrid_group_count(1000, 1 / 3) == 10


def test_hybrid_requires_even_n():
    with pytest.raises(PreconditionError, match="even"):
        hybrid_group_sizes(7, 0.5)


@given(st.integers(1, 500).map(lambda k: 2 * k), st.floats(0.05, 0.95))
def test_hybrid_sizes_partition_n(n, alpha):
    sizes = hybrid_group_sizes(n, alpha)
    assert sum(sizes) == n
    assert all(s % 2 == 0 and s >= 2 for s in sizes)
    assert max(sizes) - min(sizes) in (0, 2)
    assert sizes == sorted(sizes, reverse=True)


def test_partition_complement_and_diff():
    p = Partition.from_values((0, 3), [1.0, 2.0, 3.0, 4.0])
    assert p.complement == (1, 2)
    assert p.diff == 0.0
    assert p.balanced


@settings(max_examples=200)
@given(st.integers(1, 30).flatmap(lambda n: st.tuples(st.just(n), st.sets(st.integers(0, n - 1)))))
def test_partition_json_round_trip(args):
    n, s = args
    g = np.arange(n, dtype=float) * 0.37 - 1.1
    design = TwoCluster(Partition.from_values(sorted(s), g))
    back = design_from_dict(design_to_dict(design))
    assert back == design
    assert back.partition.diff == design.partition.diff


def test_round_trip_other_variants():
    pairs = Stratified(MatchedPairs(((0, 2), (1, 3)), 4))
    groups = (Partition((0,), (0, 1), -1.0), Partition((3,), (2, 3), 0.5))
    hybrid = Hybrid(HybridGrouping(groups, 0.5, 4))
    mix = Mixture(np.array([[1, 0], [0, 1]]), np.array([0.5, 0.5]))
    for design in (IID(3), pairs, hybrid, mix):
        assert design_from_dict(design_to_dict(design)) == design


def test_design_json_rejects_extra_payload():
    with pytest.raises(PreconditionError):
        design_from_dict({"variant": "two_cluster", "n": 2, "s": [1], "pairs": [[1, 2]]})
    with pytest.raises(PreconditionError):
        design_from_dict({"variant": "two_cluster", "n": 2, "s": [3]})


def test_hybrid_violations_detected():
    bad = HybridGrouping((Partition((0,), (0, 1, 2)), Partition((), (3,))), 0.5, 4)
    msgs = validate_design(Hybrid(bad))
    assert any("odd size" in m for m in msgs)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgscale.errors import InputError, InvariantViolation, OversizeItemError, StructuralError
from cgscale.model import (
    AssignmentMatrix,
    DeltaMatrix,
    SpeedMap,
    check_item_sizes,
    classify_migrations,
    compute_delta,
    migrations_between,
    validate_assignment,
)


def test_delta_identity_is_zero():
    a = AssignmentMatrix.from_owners([0, 0, 1])
    assert not compute_delta(a, a).d.any()


def test_first_iteration_delta_is_all_arrivals():
    nxt = AssignmentMatrix.from_owners([0, 1, 1, 2], iteration=1)
    d = compute_delta(AssignmentMatrix.empty(4, 4), nxt)
    assert (d.d.sum(axis=0) == 1).all()
    rep = classify_migrations(d)
    assert rep.arrivals == frozenset(range(4))
    assert not rep.rebalanced and not rep.departures


def test_move_from_last_to_first_consumer():
    n = 4
    prev = AssignmentMatrix.from_owners([n - 1, 0, 0, 0], n)
    nxt = AssignmentMatrix.from_owners([0, 0, 0, 0], n)
    col = compute_delta(prev, nxt).column(0)
    assert col.tolist() == [1, 0, 0, -1]


def test_classify_mixed_columns():
    d = DeltaMatrix(np.array([[1, 0, 0], [-1, 0, 0], [0, 0, 1], [0, 0, 0]]))
    rep = classify_migrations(d)
    assert rep.rebalanced == {0}
    assert rep.arrivals == {2}
    assert rep.departures == frozenset()


def test_classify_zero_matrix():
    rep = classify_migrations(DeltaMatrix(np.zeros((3, 3))))
    assert rep.rebalanced == rep.arrivals == rep.departures == frozenset()


def test_classify_rejects_double_plus():
    d = DeltaMatrix(np.array([[1], [1], [-1]]))
    with pytest.raises(InvariantViolation):
        classify_migrations(d)


def test_delta_shape_mismatch():
    with pytest.raises(StructuralError):
        compute_delta(AssignmentMatrix.empty(2, 2), AssignmentMatrix.empty(3, 3))


def test_validate_boundary_equal_capacity_passes():
    a = AssignmentMatrix.from_owners([0])
    assert validate_assignment(a, [1.0], 1.0).passed


def test_validate_uncovered_partition():
    a = AssignmentMatrix.from_owners([0, -1])
    rep = validate_assignment(a, [0.1, 0.1], 1.0)
    assert not rep.coverage_ok and rep.capacity_ok
    assert rep.coverage_violations == ((1, 0),)


def test_validate_overloaded_consumer_is_listed():
    a = AssignmentMatrix.from_owners([1, 1, 0])
    rep = validate_assignment(a, [0.51, 0.5, 0.2], 1.0)
    assert not rep.capacity_ok
    assert [c for c, _ in rep.capacity_violations] == [1]
    assert rep.capacity_violations[0][1] == pytest.approx(1.01)


def test_validate_unused_consumer_with_partition_fails_capacity():
    x = np.array([[1, 0], [0, 1]])
    a = AssignmentMatrix(x, np.array([1, 0]))
    assert not validate_assignment(a, [0.1, 0.1], 1.0).capacity_ok


def test_zero_speed_partition_still_needs_consumer():
    a = AssignmentMatrix.from_owners([0, -1])
    assert not validate_assignment(a, [0.5, 0.0], 1.0).coverage_ok


def test_oversize_item_rejected():
    with pytest.raises(OversizeItemError) as info:
        check_item_sizes([0.5, 1.5], 1.0)
    assert info.value.partition == 1


def test_speedmap_rejects_negative():
    with pytest.raises(InputError):
        SpeedMap([0.1, -0.1])


def test_assignment_is_immutable():
    a = AssignmentMatrix.from_owners([0, 1])
    with pytest.raises(ValueError):
        a.x[0, 0] = 0


def test_owners_detects_double_assignment():
    a = AssignmentMatrix(np.array([[1], [1]]), np.array([1, 1]))
    with pytest.raises(InvariantViolation):
        _ = a.owners


owners_st = st.integers(1, 8).flatmap(
    lambda n: st.tuples(st.lists(st.integers(-1, n - 1), min_size=n, max_size=n),
                        st.lists(st.integers(-1, n - 1), min_size=n, max_size=n))
)


@settings(max_examples=200, deadline=None)
@given(owners_st)
def test_delta_round_trip_and_partition_of_columns(pair):
    a, b = (AssignmentMatrix.from_owners(o) for o in pair)
    d = compute_delta(a, b)
    assert np.array_equal(a.x + d.d, b.x)
    rep = classify_migrations(d)
    nonzero = set(np.flatnonzero(d.d.any(axis=0)).tolist())
    sets = [rep.rebalanced, rep.arrivals, rep.departures]
    assert set().union(*sets) == nonzero
    assert sum(len(s) for s in sets) == len(nonzero)


def test_migrations_between_none_means_empty_prev():
    b = AssignmentMatrix.from_owners([0, 0])
    assert migrations_between(None, b).arrivals == {0, 1}

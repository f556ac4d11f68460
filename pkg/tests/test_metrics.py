import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgscale.errors import InputError, OversizeItemError
from cgscale.evaluation import evaluate, iteration_metrics, run_packer
from cgscale.metrics import (
    ParetoPoint,
    avg_rscore,
    brute_force_opt,
    cbs,
    dominates,
    pareto_front,
    rscore,
)
from cgscale.model import AssignmentMatrix, MigrationReport, migrations_between
from cgscale.streamgen import StreamConfig, generate_stream


def test_worked_example_rscore_is_three():
    # three partitions move between consumers; a fourth is a pure arrival
    prev = AssignmentMatrix.from_owners([0, 0, 1, -1, 2])
    nxt = AssignmentMatrix.from_owners([1, 2, 0, 0, 2])
    s = [100.0, 100.0, 100.0, 100.0, 100.0]
    rep = migrations_between(prev, nxt)
    assert rep.rebalanced == {0, 1, 2}
    assert rep.arrivals == {3}
    assert rscore(rep, s, 100.0) == 3.0


def test_rscore_empty_and_half():
    assert rscore(MigrationReport(), [0.3, 0.4], 1.0) == 0.0
    assert rscore(MigrationReport(rebalanced=frozenset({1})), [0.3, 50.0], 100.0) == 0.5


def test_rscore_ignores_arrivals_and_departures():
    rep = MigrationReport(arrivals=frozenset({0}), departures=frozenset({1}))
    assert rscore(rep, [1.0, 1.0], 1.0) == 0.0


def test_rscore_rejects_bad_capacity():
    with pytest.raises(InputError):
        rscore(MigrationReport(), [1.0], 0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=10), st.floats(0.01, 100),
       st.sets(st.integers(0, 9)))
def test_rscore_scale_invariant(s, lam, moved):
    rep = MigrationReport(rebalanced=frozenset(j for j in moved if j < len(s)))
    a = rscore(rep, s, 10.0)
    b = rscore(rep, [v * lam for v in s], 10.0 * lam)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


def test_cbs_examples():
    assert cbs({"a": [3, 4]}) == {"a": 0.0}
    assert cbs({"a": [2, 2], "b": [2, 4]}) == {"a": 0.0, "b": 0.5}
    assert cbs({"a": [5, 6], "b": [5, 6]}) == {"a": 0.0, "b": 0.0}


def test_cbs_errors():
    with pytest.raises(InputError):
        cbs({})
    with pytest.raises(InputError):
        cbs({"a": [1, 2], "b": [1]})
    with pytest.raises(InputError):
        cbs({"a": [1, 2]}, n=3)


def test_avg_rscore():
    assert avg_rscore([0, 0, 0]) == 0
    assert avg_rscore([3.0, 1.0]) == 2.0
    with pytest.raises(InputError):
        avg_rscore([])


def test_pareto_examples():
    pts = [ParetoPoint(str(i), c, r) for i, (c, r) in enumerate([(0, 5), (1, 1), (2, 0), (2, 2)])]
    front = pareto_front(pts)
    assert [(p.cbs, p.avg_rscore) for p in front] == [(0, 5), (1, 1), (2, 0)]
    one = ParetoPoint("x", 1, 1)
    assert pareto_front([one]) == [one]
    dup = [ParetoPoint("a", 1, 1), ParetoPoint("b", 1, 1)]
    assert len(pareto_front(dup)) == 2


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=12))
def test_pareto_front_properties(raw):
    pts = [ParetoPoint(str(i), c, r) for i, (c, r) in enumerate(raw)]
    front = pareto_front(pts)
    for a, b in itertools.permutations(front, 2):
        assert not dominates(a, b)
    for p in pts:
        if p not in front:
            assert any(dominates(q, p) for q in front)
    assert [p.cbs for p in front] == sorted(p.cbs for p in front)


def test_brute_force_examples():
    assert brute_force_opt([0.6, 0.6, 0.4, 0.4], 1.0) == 2
    assert brute_force_opt([0.3], 1.0) == 1
    assert brute_force_opt([1.0] * 5, 1.0) == 5
    with pytest.raises(OversizeItemError):
        brute_force_opt([1.5], 1.0)


def _exhaustive(items, cap):
    # reference: try every owner vector
    n = len(items)
    best = n
    for owners in itertools.product(range(n), repeat=n):
        loads = [0.0] * n
        for j, c in enumerate(owners):
            loads[c] += items[j]
        if max(loads) <= cap:
            best = min(best, len(set(owners)))
    return best


def test_brute_force_matches_exhaustive_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(40):
        items = rng.uniform(0.05, 1.0, size=int(rng.integers(1, 6))).tolist()
        assert brute_force_opt(items, 1.0) == _exhaustive(items, 1.0)


def test_avg_rscore_matches_per_iteration_mean():
    stream = generate_stream(StreamConfig(16, 40, 10.0, seed=4))
    per = iteration_metrics("mwf", run_packer(stream, "mwf"), stream)
    ev = evaluate(stream, ["mwf", "bfd-a"])
    summary = {s.algorithm: s for s in ev.summaries}
    assert summary["mwf"].avg_rscore == pytest.approx(sum(m.rscore for m in per) / len(per))
    assert per[0].rscore == 0.0

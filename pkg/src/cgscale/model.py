"""Core VISBP types: speed maps, assignment matrices, deltas and migrations.

Consumers are identified by row index and partitions by column index.  The
row index of a consumer is its identity across iterations, and the number of
rows is fixed to the number of partitions (one consumer per partition always
suffices when every speed is at most the bin capacity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import InvariantViolation, OversizeItemError, InputError, StructuralError

# relative slack used when checking capacity sums computed in different orders
CAPACITY_RTOL = 1e-9


def _binary(arr: np.ndarray) -> bool:
    return arr.size == 0 or (int(arr.min()) >= 0 and int(arr.max()) <= 1)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpeedMap:
    """Write speed (bytes/s) of every partition at one iteration."""

    speeds: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        arr = np.array(self.speeds, dtype=float)
        if arr.ndim != 1:
            raise StructuralError("speeds must be a 1-d sequence")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InputError("speeds must be finite and non-negative")
        object.__setattr__(self, "speeds", _frozen(arr))

    def __len__(self):
        return len(self.speeds)

    def __getitem__(self, j):
        return self.speeds[j]


SpeedsLike = Union[SpeedMap, Sequence[float], np.ndarray]


def as_speeds(s: SpeedsLike) -> np.ndarray:
    if isinstance(s, SpeedMap):
        return s.speeds
    arr = np.asarray(s, dtype=float)
    if arr.ndim != 1:
        raise StructuralError("speeds must be a 1-d sequence")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InputError("speeds must be finite and non-negative")
    return arr


def check_item_sizes(s: SpeedsLike, capacity: float) -> np.ndarray:
    """Return speeds as an array, rejecting any item larger than the bin."""
    if capacity <= 0:
        raise InputError(f"capacity must be positive, got {capacity!r}")
    speeds = as_speeds(s)
    over = np.flatnonzero(speeds > capacity)
    if over.size:
        j = int(over[0])
        raise OversizeItemError(j, float(speeds[j]), capacity)
    return speeds


@dataclass(frozen=True)
class AssignmentMatrix:
    """Binary consumer x partition matrix ``x`` with usage vector ``y``."""

    x: np.ndarray
    y: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        x = np.array(self.x, dtype=np.int8)
        y = np.array(self.y, dtype=np.int8)
        if x.ndim != 2 or y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise StructuralError(f"inconsistent shapes x={x.shape} y={y.shape}")
        if not (_binary(x) and _binary(y)):
            raise InvariantViolation("assignment entries must be binary")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @classmethod
    def empty(cls, n_consumers: int, n_partitions: int, iteration: int = 0):
        return cls(
            np.zeros((n_consumers, n_partitions), dtype=np.int8),
            np.zeros(n_consumers, dtype=np.int8),
            iteration,
        )

    @classmethod
    def from_owners(cls, owners: Sequence[int], n_consumers: int | None = None,
                    iteration: int = 0) -> "AssignmentMatrix":
        """Build from a partition -> consumer vector (-1 means unassigned)."""
        owners = np.asarray(owners, dtype=np.int64)
        n_partitions = len(owners)
        if n_consumers is None:
            n_consumers = n_partitions
        if owners.size and owners.max() >= n_consumers:
            raise StructuralError(
                f"consumer {int(owners.max())} out of range for {n_consumers} consumers"
            )
        x = np.zeros((n_consumers, n_partitions), dtype=np.int8)
        cols = np.flatnonzero(owners >= 0)
        x[owners[cols], cols] = 1
        y = x.any(axis=1).astype(np.int8)
        return cls(x, y, iteration)

    @property
    def shape(self):
        return self.x.shape

    @property
    def n_consumers(self) -> int:
        return self.x.shape[0]

    @property
    def n_partitions(self) -> int:
        return self.x.shape[1]

    @cached_property
    def owners(self) -> np.ndarray:
        """Consumer of each partition, -1 where the column is empty.

        Raises InvariantViolation if a partition has more than one consumer.
        """
        col = self.x.sum(axis=0)
        if np.any(col > 1):
            bad = np.flatnonzero(col > 1).tolist()
            raise InvariantViolation(f"partitions with several consumers: {bad}")
        own = np.where(col == 1, self.x.argmax(axis=0), -1)
        return _frozen(own.astype(np.int64))

    @property
    def bins_used(self) -> int:
        return int(self.y.sum())

    def partitions_of(self, consumer: int) -> list[int]:
        return np.flatnonzero(self.x[consumer]).tolist()

    def used_consumers(self) -> list[int]:
        return np.flatnonzero(self.y).tolist()

    def loads(self, s: SpeedsLike) -> np.ndarray:
        return self.x @ as_speeds(s)

    def with_iteration(self, iteration: int) -> "AssignmentMatrix":
        return AssignmentMatrix(self.x, self.y, iteration)

    def __eq__(self, other):
        if not isinstance(other, AssignmentMatrix):
            return NotImplemented
        return (self.iteration == other.iteration
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y))

    def same_assignment(self, other: "AssignmentMatrix") -> bool:
        """Equality of x and y, ignoring the iteration stamp."""
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    __hash__ = None


@dataclass(frozen=True)
class DeltaMatrix:
    d: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        d = np.array(self.d, dtype=np.int8)
        if d.ndim != 2:
            raise StructuralError("delta must be 2-d")
        object.__setattr__(self, "d", _frozen(d))

    def column(self, j: int) -> np.ndarray:
        return self.d[:, j]


@dataclass(frozen=True)
class MigrationReport:
    rebalanced: frozenset = field(default_factory=frozenset)
    arrivals: frozenset = field(default_factory=frozenset)
    departures: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking an assignment against the packing constraints.

    ``capacity_violations`` holds ``(consumer, load)`` pairs breaking the
    capacity constraint; ``coverage_violations`` holds ``(partition,
    column_sum)`` pairs whose column does not sum to one.
    """

    capacity_violations: tuple = ()
    coverage_violations: tuple = ()

    @property
    def capacity_ok(self) -> bool:
        return not self.capacity_violations

    @property
    def coverage_ok(self) -> bool:
        return not self.coverage_violations

    @property
    def passed(self) -> bool:
        return self.capacity_ok and self.coverage_ok

    def __bool__(self):
        return self.passed


def compute_delta(prev: AssignmentMatrix, next: AssignmentMatrix) -> DeltaMatrix:
    """Elementwise ``next.x - prev.x``."""
    if prev.shape != next.shape:
        raise StructuralError(f"shape mismatch {prev.shape} vs {next.shape}")
    d = next.x.astype(np.int8) - prev.x.astype(np.int8)
    return DeltaMatrix(d, next.iteration)


def classify_migrations(delta: DeltaMatrix) -> MigrationReport:
    d = delta.d
    plus = (d == 1).sum(axis=0)
    minus = (d == -1).sum(axis=0)
    bad = np.flatnonzero((plus > 1) | (minus > 1))
    if bad.size:
        raise InvariantViolation(
            f"delta columns with repeated +1/-1 entries: {bad.tolist()}"
        )
    both = (plus == 1) & (minus == 1)
    return MigrationReport(
        rebalanced=frozenset(np.flatnonzero(both).tolist()),
        arrivals=frozenset(np.flatnonzero((plus == 1) & (minus == 0)).tolist()),
        departures=frozenset(np.flatnonzero((plus == 0) & (minus == 1)).tolist()),
    )


def validate_assignment(a: AssignmentMatrix, s: SpeedsLike, capacity: float) -> ValidationReport:
    """Check the capacity and single-assignment constraints; never raises on bad data."""
    speeds = as_speeds(s)
    if speeds.shape[0] != a.n_partitions:
        raise StructuralError(
            f"{speeds.shape[0]} speeds for {a.n_partitions} partitions"
        )
    loads = a.x @ speeds
    limit = capacity * a.y + CAPACITY_RTOL * capacity
    over = np.flatnonzero(loads > limit)
    cols = a.x.sum(axis=0)
    uncovered = np.flatnonzero(cols != 1)
    return ValidationReport(
        capacity_violations=tuple((int(i), float(loads[i])) for i in over),
        coverage_violations=tuple((int(j), int(cols[j])) for j in uncovered),
    )


def migrations_between(prev: AssignmentMatrix | None, next: AssignmentMatrix) -> MigrationReport:
    if prev is None:
        prev = AssignmentMatrix.empty(*next.shape)
    return classify_migrations(compute_delta(prev, next))


"""Packing algorithms for partition -> consumer assignment.

Three families live here:

* the classic Any Fit heuristics (next, first, worst and best fit, online or
  decreasing), optionally adapted so that a newly opened bin is the consumer
  that held the item in the previous assignment;
* the migration-aware "modified" Worst/Best Fit variants, which rebuild the
  previous consumer group biggest consumer first and only move the smallest
  partitions;
* the capacity-blind equal-count assignment used by Kafka's default assignor.

Bins are scanned in the order they were opened.  Without adaptation that is
the same as index order, so "left-most" and "lowest index" coincide; with
adaptation it keeps the fit decisions (and thus the bin count) identical to
the unadapted run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityExhausted, InputError, NotAssigned
from .model import AssignmentMatrix, SpeedsLike, check_item_sizes


class FitStrategy(enum.Enum):
    NEXT = "next"
    FIRST = "first"
    WORST = "worst"
    BEST = "best"


class SortMode(enum.Enum):
    NONE = "none"
    DECREASING = "decreasing"


class ConsumerSortStrategy(enum.Enum):
    CUMULATIVE = "cumulative"
    MAX_PARTITION = "max_partition"


@dataclass(frozen=True)
class PackerConfig:
    fit: FitStrategy
    sort: SortMode = SortMode.NONE
    adapted: bool = False
    capacity: float = 1.0

    def __post_init__(self):
        if not self.capacity > 0:
            raise InputError(f"capacity must be positive, got {self.capacity!r}")


@dataclass(frozen=True)
class ModifiedConfig:
    fit: FitStrategy
    consumer_sort: ConsumerSortStrategy
    capacity: float = 1.0

    def __post_init__(self):
        if self.fit not in (FitStrategy.WORST, FitStrategy.BEST):
            raise InputError("modified packers use worst or best fit only")
        if not self.capacity > 0:
            raise InputError(f"capacity must be positive, got {self.capacity!r}")


def mwf(capacity: float = 1.0) -> ModifiedConfig:
    return ModifiedConfig(FitStrategy.WORST, ConsumerSortStrategy.CUMULATIVE, capacity)


def mbf(capacity: float = 1.0) -> ModifiedConfig:
    return ModifiedConfig(FitStrategy.BEST, ConsumerSortStrategy.CUMULATIVE, capacity)


def mwfp(capacity: float = 1.0) -> ModifiedConfig:
    return ModifiedConfig(FitStrategy.WORST, ConsumerSortStrategy.MAX_PARTITION, capacity)


def mbfp(capacity: float = 1.0) -> ModifiedConfig:
    return ModifiedConfig(FitStrategy.BEST, ConsumerSortStrategy.MAX_PARTITION, capacity)


def lowest_unused_consumer(y: Sequence[int]) -> int:
    for i, used in enumerate(y):
        if not used:
            return i
    raise CapacityExhausted(f"all {len(y)} consumers are in use")


def previous_consumer(j: int, prev: AssignmentMatrix) -> int:
    owner = int(prev.owners[j])
    if owner < 0:
        raise NotAssigned(f"partition {j} is unassigned in iteration {prev.iteration}")
    return owner


def choose_bin_to_open(j: int, prev: AssignmentMatrix | None, y: Sequence[int]) -> int:
    """Consumer to open for partition ``j`` when it fits no open bin.

    Reopens the consumer that held ``j`` in ``prev`` when that consumer is
    still unused, otherwise falls back to the lowest unused index.
    """
    if prev is not None:
        try:
            g = previous_consumer(j, prev)
        except NotAssigned:
            pass
        else:
            if not y[g]:
                return g
    return lowest_unused_consumer(y)


class _Bins:
    """Bins opened during one packing run, in opening order."""

    def __init__(self, n_consumers: int, capacity: float, fit: FitStrategy):
        self.capacity = capacity
        self.fit = fit
        self.used = [0] * n_consumers
        self.loads: dict[int, float] = {}
        self.current: int | None = None

    def fits(self, c: int, size: float) -> bool:
        return self.loads[c] + size <= self.capacity

    def choose(self, size: float) -> int | None:
        cap = self.capacity
        fit = self.fit
        if fit is FitStrategy.NEXT:
            c = self.current
            if c is not None and self.loads[c] + size <= cap:
                return c
            return None
        if fit is FitStrategy.FIRST:
            for c, load in self.loads.items():
                if load + size <= cap:
                    return c
            return None
        best = None
        best_load = 0.0
        if fit is FitStrategy.WORST:
            for c, load in self.loads.items():
                if load + size <= cap and (best is None or load < best_load):
                    best, best_load = c, load
        else:
            for c, load in self.loads.items():
                if load + size <= cap and (best is None or load > best_load):
                    best, best_load = c, load
        return best

    def open(self, c: int):
        if self.used[c]:
            raise CapacityExhausted(f"consumer {c} is already open")
        self.used[c] = 1
        self.loads[c] = 0.0
        self.current = c

    def is_open(self, c: int) -> bool:
        return bool(self.used[c])

    def place(self, c: int, size: float):
        self.loads[c] += size


def _decreasing(indices: Iterable[int], speeds) -> list[int]:
    return sorted(indices, key=lambda j: (-speeds[j], j))


def _next_iteration(prev: AssignmentMatrix | None, iteration: int | None) -> int:
    if iteration is not None:
        return iteration
    return prev.iteration + 1 if prev is not None else 1


def pack_classic(cfg: PackerConfig, s: SpeedsLike, prev: AssignmentMatrix | None = None,
                 iteration: int | None = None) -> AssignmentMatrix:
    """Run a (possibly adapted) Any Fit / Next Fit heuristic on one measurement."""
    speeds = check_item_sizes(s, cfg.capacity).tolist()
    n = len(speeds)
    if prev is not None and prev.n_partitions != n:
        raise InputError(f"previous assignment has {prev.n_partitions} partitions, expected {n}")
    if cfg.sort is SortMode.DECREASING:
        order = _decreasing(range(n), speeds)
    else:
        order = range(n)
    reopen_from = prev if cfg.adapted else None
    bins = _Bins(n, cfg.capacity, cfg.fit)
    owners = [-1] * n
    for j in order:
        size = speeds[j]
        c = bins.choose(size)
        if c is None:
            c = choose_bin_to_open(j, reopen_from, bins.used)
            bins.open(c)
        bins.place(c, size)
        owners[j] = c
    return AssignmentMatrix.from_owners(owners, n, _next_iteration(prev, iteration))


def pack_modified(cfg: ModifiedConfig, s: SpeedsLike, prev: AssignmentMatrix | None = None,
                  unassigned: Iterable[int] = (), iteration: int | None = None) -> AssignmentMatrix:
    """Migration-aware Worst/Best Fit.

    Consumers of ``prev`` are revisited biggest first (by cumulative or by
    largest partition speed under the current measurement).  For each of
    them, its partitions are first offered smallest first to bins already
    created in this run; at the first partition that does not fit, the
    consumer itself is recreated and filled biggest first with what is left.
    Anything that still does not fit, plus ``unassigned``, is packed at the
    end in decreasing order with the same fit rule.
    """
    speeds = check_item_sizes(s, cfg.capacity).tolist()
    n = len(speeds)
    if prev is not None and prev.n_partitions != n:
        raise InputError(f"previous assignment has {prev.n_partitions} partitions, expected {n}")
    pending = set(int(j) for j in unassigned)
    groups: dict[int, list[int]] = {}
    if prev is not None:
        for j, c in enumerate(prev.owners.tolist()):
            if c < 0:
                pending.add(j)
            elif j not in pending:
                groups.setdefault(c, []).append(j)
    else:
        pending.update(range(n))

    if cfg.consumer_sort is ConsumerSortStrategy.CUMULATIVE:
        def key(c):
            return sum(speeds[j] for j in groups[c])
    else:
        def key(c):
            return max(speeds[j] for j in groups[c])
    consumers = sorted(groups, key=lambda c: (-key(c), c))

    bins = _Bins(n, cfg.capacity, cfg.fit)
    owners = [-1] * n
    leftovers: list[int] = []
    for c in consumers:
        pset = _decreasing(groups[c], speeds)
        while pset:
            p = pset[-1]
            b = bins.choose(speeds[p])
            if b is None:
                break
            bins.place(b, speeds[p])
            owners[p] = b
            pset.pop()
        if not pset:
            continue
        if not bins.is_open(c):
            bins.open(c)
        while pset and bins.fits(c, speeds[pset[0]]):
            p = pset.pop(0)
            bins.place(c, speeds[p])
            owners[p] = c
        leftovers.extend(pset)

    for p in _decreasing(list(pending) + leftovers, speeds):
        b = bins.choose(speeds[p])
        if b is None:
            b = lowest_unused_consumer(bins.used)
            bins.open(b)
        bins.place(b, speeds[p])
        owners[p] = b
    return AssignmentMatrix.from_owners(owners, n, _next_iteration(prev, iteration))


def kafka_assign(n_consumers: int, partitions: Sequence[int] | int,
                 shuffle_seed: int | None = None, iteration: int = 1) -> AssignmentMatrix:
    """Equal-count round-robin assignment, blind to partition speeds.

    ``partitions`` is the ordered partition list (or its length).  Position
    ``p`` in that order goes to consumer ``p % n_consumers``.  With
    ``shuffle_seed`` the order is first permuted by a seeded PCG64 stream.
    """
    if isinstance(partitions, (int, np.integer)):
        partitions = list(range(int(partitions)))
    else:
        partitions = [int(j) for j in partitions]
    n = len(partitions)
    if n_consumers < 1:
        raise InputError("need at least one consumer")
    if n_consumers > n:
        raise InputError(f"{n_consumers} consumers for {n} partitions")
    if shuffle_seed is not None:
        rng = np.random.Generator(np.random.PCG64(shuffle_seed))
        partitions = [partitions[i] for i in rng.permutation(n)]
    owners = [-1] * n
    for pos, j in enumerate(partitions):
        owners[j] = pos % n_consumers
    return AssignmentMatrix.from_owners(owners, n, iteration)

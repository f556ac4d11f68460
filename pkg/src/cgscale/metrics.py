"""Rebalance cost, operational cost and Pareto analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import InputError
from .model import MigrationReport, SpeedsLike, as_speeds, check_item_sizes


@dataclass(frozen=True)
class IterationMetrics:
    algorithm: str
    iteration: int
    bins_used: int
    rscore: float


@dataclass(frozen=True)
class AlgorithmSummary:
    algorithm: str
    cbs: float
    avg_rscore: float
    avg_bins: float


@dataclass(frozen=True)
class ParetoPoint:
    algorithm: str
    cbs: float
    avg_rscore: float

    @property
    def objectives(self) -> tuple[float, float]:
        return (self.cbs, self.avg_rscore)


def rscore(report: MigrationReport, s: SpeedsLike, capacity: float) -> float:
    """Summed write speed of the rebalanced partitions, in units of capacity.

    Pure arrivals and departures cost nothing.
    """
    if not capacity > 0:
        raise InputError(f"capacity must be positive, got {capacity!r}")
    speeds = as_speeds(s)
    return float(sum(speeds[j] for j in sorted(report.rebalanced))) / capacity


def cbs(per_iteration: Mapping[str, Sequence[int]], n: int | None = None) -> dict[str, float]:
    """Cardinal bin score: mean relative excess over the per-iteration minimum."""
    if not per_iteration:
        raise InputError("cbs needs at least one algorithm")
    lengths = {len(v) for v in per_iteration.values()}
    if len(lengths) != 1:
        raise InputError(f"algorithms have different iteration counts: {sorted(lengths)}")
    (length,) = lengths
    if n is None:
        n = length
    if n != length or n == 0:
        raise InputError(f"expected {n} iterations per algorithm, got {length}")
    names = list(per_iteration)
    mins = [min(per_iteration[a][i] for a in names) for i in range(n)]
    if min(mins) < 1:
        raise InputError("bin counts must be at least 1")
    return {
        a: sum((per_iteration[a][i] - mins[i]) / mins[i] for i in range(n)) / n
        for a in names
    }


def avg_rscore(rscores: Sequence[float]) -> float:
    if len(rscores) == 0:
        raise InputError("avg_rscore of an empty sequence")
    return math.fsum(rscores) / len(rscores)


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """True when ``a`` is no worse than ``b`` in both objectives and better in one."""
    return (a.cbs <= b.cbs and a.avg_rscore <= b.avg_rscore
            and (a.cbs < b.cbs or a.avg_rscore < b.avg_rscore))


def pareto_front(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    front = [p for p in points if not any(dominates(q, p) for q in points)]
    return sorted(front, key=lambda p: (p.cbs, p.avg_rscore))


def brute_force_opt(s: SpeedsLike, capacity: float, max_items: int = 12) -> int:
    """Minimum number of bins, by exhaustive search over set partitions.

    Branch and bound: items are placed largest first into each existing bin
    (bins with equal load are tried once) or into a new bin, cutting branches
    that cannot beat the best count found so far.
    """
    items = sorted(check_item_sizes(s, capacity).tolist(), reverse=True)
    if len(items) > max_items:
        raise InputError(f"brute force limited to {max_items} items, got {len(items)}")
    if not items:
        return 0
    best = len(items)
    loads: list[float] = []

    def search(i: int):
        nonlocal best
        if len(loads) >= best:
            return
        if i == len(items):
            best = len(loads)
            return
        size = items[i]
        seen = set()
        for b in range(len(loads)):
            if loads[b] in seen or loads[b] + size > capacity:
                continue
            old = loads[b]
            seen.add(old)
            loads[b] = old + size
            search(i + 1)
            loads[b] = old
        loads.append(size)
        search(i + 1)
        loads.pop()

    search(0)
    return best

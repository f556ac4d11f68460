"""Algorithm registry and offline evaluation of packers over a stream."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import InputError
from .heuristics import (
    FitStrategy,
    PackerConfig,
    SortMode,
    mbf,
    mbfp,
    mwf,
    mwfp,
    pack_classic,
    pack_modified,
)
from .metrics import AlgorithmSummary, IterationMetrics, ParetoPoint, avg_rscore, cbs, pareto_front, rscore
from .model import AssignmentMatrix, SpeedsLike, migrations_between
from .streamgen import MeasurementStream

CLASSIC = {
    "nf": (FitStrategy.NEXT, SortMode.NONE),
    "nfd": (FitStrategy.NEXT, SortMode.DECREASING),
    "ff": (FitStrategy.FIRST, SortMode.NONE),
    "ffd": (FitStrategy.FIRST, SortMode.DECREASING),
    "wf": (FitStrategy.WORST, SortMode.NONE),
    "wfd": (FitStrategy.WORST, SortMode.DECREASING),
    "bf": (FitStrategy.BEST, SortMode.NONE),
    "bfd": (FitStrategy.BEST, SortMode.DECREASING),
}
MODIFIED = {"mwf": mwf, "mbf": mbf, "mwfp": mwfp, "mbfp": mbfp}
ADAPTED_SUFFIX = "-a"

CLASSIC_NAMES = tuple(CLASSIC)
ADAPTED_NAMES = tuple(name + ADAPTED_SUFFIX for name in CLASSIC)
MODIFIED_NAMES = tuple(MODIFIED)
ALL_NAMES = CLASSIC_NAMES + ADAPTED_NAMES + MODIFIED_NAMES
# the comparison set: adapted classics as baselines plus the modified packers
COMPARISON_SET = ADAPTED_NAMES + MODIFIED_NAMES

Packer = Callable[[SpeedsLike, "AssignmentMatrix | None", int], AssignmentMatrix]


def make_packer(name: str, capacity: float) -> Packer:
    """Return ``pack(speeds, prev, iteration) -> AssignmentMatrix`` for a named algorithm."""
    key = name.lower()
    if key in MODIFIED:
        cfg_m = MODIFIED[key](capacity)

        def pack(s, prev, iteration):
            return pack_modified(cfg_m, s, prev, iteration=iteration)
        return pack
    adapted = key.endswith(ADAPTED_SUFFIX)
    base = key[: -len(ADAPTED_SUFFIX)] if adapted else key
    if base not in CLASSIC:
        raise InputError(f"unknown algorithm {name!r}")
    fit, sort = CLASSIC[base]
    cfg = PackerConfig(fit, sort, adapted, capacity)

    def pack(s, prev, iteration):
        return pack_classic(cfg, s, prev, iteration=iteration)
    return pack


def resolve_names(names: Iterable[str], adapted: bool = False) -> list[str]:
    """Normalise algorithm names; with ``adapted`` classic names map to their adapted form."""
    out = []
    for name in names:
        key = name.strip().lower()
        if not key:
            continue
        if adapted and key in CLASSIC:
            key += ADAPTED_SUFFIX
        if key not in ALL_NAMES:
            raise InputError(f"unknown algorithm {name!r}")
        if key not in out:
            out.append(key)
    return out


def run_packer(stream: MeasurementStream, name: str) -> list[AssignmentMatrix]:
    """Pack every measurement, each run seeing the previous output of the same algorithm."""
    pack = make_packer(name, stream.capacity)
    prev = None
    out = []
    for k in range(1, stream.n_iterations + 1):
        cur = pack(stream.speeds[k - 1], prev, k)
        out.append(cur)
        prev = cur
    return out


def iteration_metrics(name: str, assignments: Sequence[AssignmentMatrix],
                      stream: MeasurementStream) -> list[IterationMetrics]:
    out = []
    prev = None
    for k, cur in enumerate(assignments, start=1):
        report = migrations_between(prev, cur)
        out.append(IterationMetrics(name, k, cur.bins_used,
                                    rscore(report, stream.speeds[k - 1], stream.capacity)))
        prev = cur
    return out


def evaluate_stream(stream: MeasurementStream, algorithms: Sequence[str]) -> dict[str, list[IterationMetrics]]:
    return {name: iteration_metrics(name, run_packer(stream, name), stream) for name in algorithms}


@dataclass(frozen=True)
class Evaluation:
    per_iteration: dict
    summaries: list
    front: list


def summarize(per_iteration: dict[str, list[IterationMetrics]]) -> list[AlgorithmSummary]:
    bins = {a: [m.bins_used for m in ms] for a, ms in per_iteration.items()}
    scores = cbs(bins)
    return [
        AlgorithmSummary(
            a,
            scores[a],
            avg_rscore([m.rscore for m in ms]),
            sum(bins[a]) / len(bins[a]),
        )
        for a, ms in per_iteration.items()
    ]


def evaluate(stream: MeasurementStream, algorithms: Sequence[str]) -> Evaluation:
    per_iteration = evaluate_stream(stream, algorithms)
    summaries = summarize(per_iteration)
    front = pareto_front([ParetoPoint(s.algorithm, s.cbs, s.avg_rscore) for s in summaries])
    return Evaluation(per_iteration, summaries, front)

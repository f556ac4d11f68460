"""Per-byte latency model with a fixed and a rebalanced queue per consumer.

Within one iteration every queue's latency is linear in the byte index, so
the samples of a queue are stored as a :class:`LatencySegment` (slope,
intercept, number of samples, stride) rather than materialised.  Counts,
order statistics and histograms over a whole experiment are computed from
the segments in closed form; :meth:`LatencySegment.values` gives the explicit
samples when they are wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError, ModelDegenerate
from .evaluation import make_packer
from .heuristics import kafka_assign
from .model import AssignmentMatrix, SpeedsLike, as_speeds, compute_delta
from .streamgen import MeasurementStream

FIXED = "fixed"
REBALANCED = "rebalanced"
PERCENTILES = (50, 90, 99)


@dataclass(frozen=True)
class LatencyConfig:
    consumer_capacity: float
    iteration_secs: float = 30.0
    rebalance_secs: float = 5.0
    sample_stride: float = 1.0

    def __post_init__(self):
        if not self.consumer_capacity > 0:
            raise InputError("consumer capacity must be positive")
        if not 0 <= self.rebalance_secs < self.iteration_secs:
            raise InputError("rebalance_secs must lie in [0, iteration_secs)")
        if not self.sample_stride >= 1:
            raise InputError("sample_stride must be at least 1 byte")


@dataclass(frozen=True)
class QueueModel:
    consumer: int
    iteration: int
    w_fixed: float
    w_rebalanced: float
    r_fixed: float
    r_rebalanced: float
    t_fixed: float
    t_rebalanced: float
    b_fixed: float


@dataclass(frozen=True)
class LatencySample:
    consumer: int
    iteration: int
    kind: str
    byte_index: float
    latency: float


@dataclass(frozen=True)
class LatencySegment:
    """Samples ``max(slope * k * stride + intercept, 0)`` for ``k = 0 .. count - 1``."""

    consumer: int
    iteration: int
    kind: str
    slope: float
    intercept: float
    count: int
    stride: float = 1.0

    def values(self) -> np.ndarray:
        return np.maximum(self.slope * (np.arange(self.count) * self.stride) + self.intercept, 0.0)

    def at(self, byte_index: float) -> float:
        return max(self.slope * byte_index + self.intercept, 0.0)

    def samples(self) -> list[LatencySample]:
        return [
            LatencySample(self.consumer, self.iteration, self.kind, k * self.stride, float(v))
            for k, v in enumerate(self.values())
        ]


def bin_capacity_bound(consumer_capacity: float, iteration_secs: float = 30.0,
                       rebalance_secs: float = 5.0) -> float:
    """Largest bin capacity whose rebalanced queue still drains within one iteration."""
    if not 0 <= rebalance_secs < iteration_secs:
        raise InputError("rebalance_secs must lie in [0, iteration_secs)")
    return consumer_capacity * (iteration_secs - rebalance_secs) / iteration_secs


def partition_queues(prev: AssignmentMatrix, next: AssignmentMatrix, c: int) -> tuple[set, set]:
    """(carried-over, newly assigned) partitions of consumer ``c``."""
    d = compute_delta(prev, next).d[c]
    rebalanced = set(np.flatnonzero(d == 1).tolist())
    fixed = set(np.flatnonzero(next.x[c] == 1).tolist()) - rebalanced
    return fixed, rebalanced


def _n_samples(total_bytes: float, stride: float) -> int:
    if total_bytes <= 0:
        return 0
    return int(math.ceil(total_bytes / stride - 1e-12))


def queue_models(prev: AssignmentMatrix, next: AssignmentMatrix, s: SpeedsLike,
                 cfg: LatencyConfig, carried: Mapping[int, float]) -> list[QueueModel]:
    speeds = as_speeds(s)
    delta = compute_delta(prev, next).d
    cbar = cfg.consumer_capacity
    out = []
    for c in next.used_consumers():
        new = delta[c] == 1
        mine = next.x[c] == 1
        w_r = float(speeds[new].sum())
        w_f = float(speeds[mine & ~new].sum())
        r_f = cbar if w_r == 0 else min(cbar, w_f)
        out.append(QueueModel(
            consumer=c,
            iteration=next.iteration,
            w_fixed=w_f,
            w_rebalanced=w_r,
            r_fixed=r_f,
            r_rebalanced=cbar - r_f,
            t_fixed=cfg.iteration_secs * w_f,
            t_rebalanced=cfg.iteration_secs * w_r,
            b_fixed=float(carried.get(c, 0.0)),
        ))
    return out


def iteration_latency(prev: AssignmentMatrix, next: AssignmentMatrix, s: SpeedsLike,
                      cfg: LatencyConfig, carried: Mapping[int, float]
                      ) -> tuple[list[LatencySegment], dict[int, float]]:
    """Latency segments for one iteration and the fixed-queue latency carried forward.

    Consumers not used in ``next`` drop their carried latency; consumers
    without an entry in ``carried`` start from zero.
    """
    segments = []
    carried_next = {}
    for q in queue_models(prev, next, s, cfg, carried):
        if q.w_fixed > 0:
            m_f = 1.0 / q.r_fixed - 1.0 / q.w_fixed
            segments.append(LatencySegment(q.consumer, q.iteration, FIXED, m_f, q.b_fixed,
                                           _n_samples(q.t_fixed, cfg.sample_stride),
                                           cfg.sample_stride))
            carried_next[q.consumer] = max(m_f * q.t_fixed + q.b_fixed, 0.0)
        else:
            # an idle fixed queue leaves the carried value where it was
            carried_next[q.consumer] = max(q.b_fixed, 0.0)
        if q.w_rebalanced > 0:
            if q.r_rebalanced <= 0:
                raise ModelDegenerate(
                    f"consumer {q.consumer} has no capacity left for its rebalanced queue "
                    f"at iteration {q.iteration}"
                )
            m_r = 1.0 / q.r_rebalanced - 1.0 / q.w_rebalanced
            segments.append(LatencySegment(q.consumer, q.iteration, REBALANCED, m_r,
                                           cfg.rebalance_secs,
                                           _n_samples(q.t_rebalanced, cfg.sample_stride),
                                           cfg.sample_stride))
    return segments, carried_next


class LatencySeries:
    """Closed-form statistics over the positive samples of many segments."""

    def __init__(self, segments: Iterable[LatencySegment]):
        segs = [s for s in segments if s.count > 0]
        self.segments = segs
        self._m = np.array([s.slope for s in segs], dtype=float)
        self._b = np.array([s.intercept for s in segs], dtype=float)
        self._n = np.array([s.count for s in segs], dtype=np.int64)
        self._s = np.array([s.stride for s in segs], dtype=float)
        self._zero = self._count_le(0.0)
        self.total = int(self._n.sum())
        self.positive = int((self._count_le(np.inf) - self._zero).sum())

    def _val(self, k):
        return self._m * (k * self._s) + self._b

    def _count_le(self, v: float) -> np.ndarray:
        """Per segment, number of samples whose unclipped value is <= v."""
        if self._m.size == 0:
            return np.zeros(0, dtype=np.int64)
        if np.isinf(v):
            return self._n.copy()
        return self._count_le_grid(np.array([v], dtype=float))[0]

    def _count_le_grid(self, vs: np.ndarray) -> np.ndarray:
        """``_count_le`` for every threshold in ``vs``; shape (len(vs), segments)."""
        m, b, n, s = self._m, self._b, self._n, self._s
        v = vs[:, None]
        out = np.where(b <= v, n, 0)
        up, down = m > 0, m < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (v - b) / (m * s)
        if up.any():
            # increasing: k <= x
            k = np.clip(np.floor(x[:, up]) + 1, 0, n[up]).astype(np.int64)
            out[:, up] = self._fix_up(k, up, v)
        if down.any():
            # decreasing: values <= v are k >= x
            first = np.clip(np.ceil(x[:, down]), 0, n[down]).astype(np.int64)
            out[:, down] = n[down] - self._fix_down(first, down, v)
        return out

    def _fix_up(self, k, mask, v):
        m, b, s, n = self._m[mask], self._b[mask], self._s[mask], self._n[mask]
        for _ in range(2):
            lower = (k > 0) & (m * ((k - 1) * s) + b > v)
            k = np.where(lower, k - 1, k)
            higher = (k < n) & (m * (k * s) + b <= v)
            k = np.where(higher, k + 1, k)
        return k

    def _fix_down(self, first, mask, v):
        m, b, s, n = self._m[mask], self._b[mask], self._s[mask], self._n[mask]
        for _ in range(2):
            earlier = (first > 0) & (m * ((first - 1) * s) + b <= v)
            first = np.where(earlier, first - 1, first)
            later = (first < n) & (m * (first * s) + b > v)
            first = np.where(later, first + 1, first)
        return first

    def count_le(self, v: float) -> int:
        """Number of positive samples with latency <= v."""
        if v <= 0 or self._m.size == 0:
            return 0
        return int((self._count_le(v) - self._zero).sum())

    def max(self) -> float:
        if self.positive == 0:
            return 0.0
        first = self._b
        last = self._val(self._n - 1)
        return float(max(first.max(), last.max(), 0.0))

    def order_stat(self, r: int) -> float:
        """The r-th smallest positive sample (1-based)."""
        if not 1 <= r <= self.positive:
            raise IndexError(f"rank {r} outside 1..{self.positive}")
        lo, hi = 0.0, self.max()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.count_le(mid) >= r:
                hi = mid
            else:
                lo = mid
        return self._smallest_above(lo)

    def _smallest_above(self, lo: float) -> float:
        """Smallest positive sample value strictly greater than ``lo``."""
        best = np.inf
        cnt = self._count_le(lo)
        floor0 = np.maximum(cnt, self._zero)
        for i in range(self._m.size):
            m, b, s, n = self._m[i], self._b[i], self._s[i], self._n[i]
            if m > 0:
                k = floor0[i]
                if k < n:
                    best = min(best, m * (k * s) + b)
            elif m < 0:
                # values above lo are k < n - count_le(lo); the smallest is the last of them
                k = n - cnt[i] - 1
                if k >= 0:
                    val = m * (k * s) + b
                    if val > 0:
                        best = min(best, val)
            elif b > lo and b > 0:
                best = min(best, b)
        return float(best)

    def percentile(self, q: float) -> float:
        """Inverted-CDF percentile of the positive samples; 0 when there are none."""
        if self.positive == 0:
            return 0.0
        r = max(1, int(math.ceil(q / 100.0 * self.positive - 1e-9)))
        return self.order_stat(min(r, self.positive))

    def histogram(self, edges: Sequence[float]) -> list[int]:
        """Counts of positive samples in ``(edges[i], edges[i + 1]]``."""
        edges = np.asarray(edges, dtype=float)
        if self._m.size == 0:
            return [0] * (len(edges) - 1)
        cum = []
        for chunk in np.array_split(edges, max(1, len(edges) // 64)):
            grid = self._count_le_grid(np.where(np.isinf(chunk), np.finfo(float).max, chunk))
            counts = (grid - self._zero).sum(axis=1)
            cum.extend(0 if e <= 0 else int(c) for e, c in zip(chunk, counts))
        return [cum[i + 1] - cum[i] for i in range(len(edges) - 1)]

    def box_stats(self) -> dict[str, float]:
        if self.positive == 0:
            return dict(whislo=0.0, q1=0.0, med=0.0, q3=0.0, whishi=0.0)
        q1, med, q3 = (self.percentile(q) for q in (25, 50, 75))
        iqr = q3 - q1
        hi_rank = self.count_le(q3 + 1.5 * iqr)
        lo_rank = self.count_le(q1 - 1.5 * iqr) + 1
        return dict(
            whislo=self.order_stat(lo_rank),
            q1=q1, med=med, q3=q3,
            whishi=self.order_stat(max(hi_rank, 1)),
        )


@dataclass
class LatencyReport:
    algorithm: str
    avg_consumers: float
    series: LatencySeries
    consumers: list = field(default_factory=list)

    @property
    def positive_samples(self) -> int:
        return self.series.positive

    @property
    def total_samples(self) -> int:
        return self.series.total

    def percentile(self, q: float) -> float:
        return self.series.percentile(q)

    @property
    def p90(self) -> float:
        return self.series.percentile(90)

    @property
    def max(self) -> float:
        return self.series.max()

    def histogram(self, edges):
        return self.series.histogram(edges)


def parse_kafka(name: str) -> int | None:
    """Consumer count for ``kafka_N`` / ``kd_N`` names, else None."""
    key = name.lower()
    for prefix in ("kafka_", "kd_"):
        if key.startswith(prefix):
            try:
                return int(key[len(prefix):])
            except ValueError:
                raise InputError(f"bad kafka assigner name {name!r}") from None
    return None


def run_latency_experiment(stream: MeasurementStream, assigner: str, cfg: LatencyConfig,
                           bytes_per_unit: float = 1.0) -> LatencyReport:
    """Replay a stream under one assigner and collect every latency segment.

    Speeds and the consumer capacity are in stream units and are multiplied by
    ``bytes_per_unit`` before the per-byte model runs; the packer capacity is
    the stream's capacity.
    """
    n_kafka = parse_kafka(assigner)
    cfg_bytes = LatencyConfig(cfg.consumer_capacity * bytes_per_unit, cfg.iteration_secs,
                              cfg.rebalance_secs, cfg.sample_stride)
    if n_kafka is None:
        bound = bin_capacity_bound(cfg.consumer_capacity, cfg.iteration_secs, cfg.rebalance_secs)
        if stream.capacity > bound * (1 + 1e-12):
            raise InputError(
                f"bin capacity {stream.capacity} exceeds the drain bound {bound} "
                f"for consumer capacity {cfg.consumer_capacity}"
            )
        pack = make_packer(assigner, stream.capacity)
    else:
        fixed = kafka_assign(n_kafka, stream.n_partitions)

    segments: list[LatencySegment] = []
    consumers = []
    carried: dict[int, float] = {}
    prev = None
    for k in range(1, stream.n_iterations + 1):
        speeds = stream.speeds[k - 1]
        if n_kafka is None:
            cur = pack(speeds, prev, k)
            before = prev if prev is not None else AssignmentMatrix.empty(*cur.shape, k - 1)
        else:
            # a fixed assignment: every partition sits in the fixed queue from the start
            cur = fixed.with_iteration(k)
            before = cur
        segs, carried = iteration_latency(before, cur, speeds * bytes_per_unit, cfg_bytes, carried)
        segments.extend(segs)
        consumers.append(cur.bins_used)
        prev = cur
    return LatencyReport(assigner, float(np.mean(consumers)), LatencySeries(segments), consumers)

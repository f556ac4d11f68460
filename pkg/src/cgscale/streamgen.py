"""Synthetic write-speed streams.

Each partition starts from an initial speed and then performs a bounded
random walk: at every step its speed moves by ``u * C / 100`` with ``u``
uniform in ``[-delta, delta]``, clipped to ``[0, C]``.  Draws come from a
PCG64 generator, one per partition per step in ascending partition order, so
a (config, seed) pair always yields the same stream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import SpeedMap

GENERATOR_NAME = "numpy.random.PCG64"


class InitMode(enum.Enum):
    UNIFORM = "uniform"
    ZERO = "zero"
    HALF = "half"
    FULL = "full"


@dataclass(frozen=True)
class StreamConfig:
    partitions: int
    iterations: int
    delta: float
    capacity: float = 1.0
    init_mode: InitMode = InitMode.UNIFORM
    seed: int = 0

    def __post_init__(self):
        if self.partitions < 1:
            raise InputError("need at least one partition")
        if self.iterations < 1:
            raise InputError("need at least one iteration")
        if not 0 <= self.delta <= 100:
            raise InputError(f"delta must be in [0, 100], got {self.delta!r}")
        if not self.capacity > 0:
            raise InputError(f"capacity must be positive, got {self.capacity!r}")
        object.__setattr__(self, "init_mode", InitMode(self.init_mode))


@dataclass(frozen=True)
class MeasurementStream:
    """``speeds[k - 1, j]`` is the write speed of partition ``j`` at iteration ``k``."""

    speeds: np.ndarray
    capacity: float
    delta: float = 0.0
    seed: int | None = None
    init_mode: str = "uniform"
    clamp_count: int = 0
    generator: str = GENERATOR_NAME
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.array(self.speeds, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"stream speeds must be a non-empty N x P array, got {arr.shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InputError("stream speeds must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "speeds", arr)

    @property
    def n_iterations(self) -> int:
        return self.speeds.shape[0]

    @property
    def n_partitions(self) -> int:
        return self.speeds.shape[1]

    def measurement(self, k: int) -> SpeedMap:
        """SpeedMap for iteration ``k`` (1-based)."""
        if not 1 <= k <= self.n_iterations:
            raise IndexError(f"iteration {k} outside 1..{self.n_iterations}")
        return SpeedMap(self.speeds[k - 1], k)

    def __iter__(self):
        for k in range(1, self.n_iterations + 1):
            yield self.measurement(k)

    def __len__(self):
        return self.n_iterations


def _initial(cfg: StreamConfig, rng: np.random.Generator) -> np.ndarray:
    p, c = cfg.partitions, cfg.capacity
    if cfg.init_mode is InitMode.UNIFORM:
        return rng.uniform(0.0, c, size=p)
    if cfg.init_mode is InitMode.ZERO:
        return np.zeros(p)
    if cfg.init_mode is InitMode.HALF:
        return np.full(p, 0.5 * c)
    return np.full(p, c)


def generate_stream(cfg: StreamConfig) -> MeasurementStream:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    c = cfg.capacity
    out = np.empty((cfg.iterations, cfg.partitions))
    out[0] = _initial(cfg, rng)
    clamps = 0
    for k in range(1, cfg.iterations):
        u = rng.uniform(-cfg.delta, cfg.delta, size=cfg.partitions)
        raw = np.maximum(0.0, out[k - 1] + u / 100.0 * c)
        clamps += int(np.count_nonzero(raw > c))
        out[k] = np.minimum(raw, c)
    return MeasurementStream(
        out,
        capacity=c,
        delta=cfg.delta,
        seed=cfg.seed,
        init_mode=cfg.init_mode.value,
        clamp_count=clamps,
    )


def scaled(stream: MeasurementStream, factor: float) -> MeasurementStream:
    """Same stream with speeds and capacity multiplied by ``factor``."""
    if not factor > 0:
        raise InputError("scale factor must be positive")
    return MeasurementStream(
        stream.speeds * factor,
        capacity=stream.capacity * factor,
        delta=stream.delta,
        seed=stream.seed,
        init_mode=stream.init_mode,
        clamp_count=stream.clamp_count,
        generator=stream.generator,
        meta=dict(stream.meta),
    )

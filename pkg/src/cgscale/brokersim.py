"""Discrete-event simulation of the monitor / controller / consumer control plane.

The controller is a four-phase state machine (:func:`controller_step`) that is
pure: it maps a state and an input to a new state and a list of actions.  The
:class:`Simulation` drives it over a measurement stream on a single simulated
timeline, creates consumers, runs the synchronous stop/start protocol against
simulated consumers and records the four response-time phases:

* ``dt1``: monitor convergence (0 when measurements come straight from a stream)
* ``dt2``: packer run plus consumer creation requests
* ``dt3``: time for one created consumer to become ready
* ``dt4``: first protocol message sent to last acknowledgement received

Consumers only read their metadata inbox at the end of a fetch/process cycle,
so each protocol leg waits for the rest of the receiving consumer's cycle.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import CGScaleError, InvariantViolation, ProtocolViolation, SimulationFault
from .evaluation import make_packer
from .latency import bin_capacity_bound
from .metrics import IterationMetrics, rscore
from .model import CAPACITY_RTOL, AssignmentMatrix, migrations_between
from .streamgen import MeasurementStream

DT1, DT2, DT3, DT4 = "dt1", "dt2", "dt3", "dt4"


class InsufficientData(CGScaleError):
    """Fewer than two size samples inside the averaging window."""


@dataclass
class SimClock:
    now: float = 0.0

    def advance_to(self, t: float):
        if t < self.now:
            raise InvariantViolation(f"clock moving backwards: {t} < {self.now}")
        self.now = t


@dataclass(frozen=True)
class SizeSample:
    partition: int
    cumulative_bytes: float
    timestamp: float


@dataclass(frozen=True)
class TimingRecord:
    event: str
    duration: float
    iteration: int


@dataclass(frozen=True)
class TraceEvent:
    time: float
    actor: str
    kind: str
    partition: int = -1
    consumer: int = -1


# --------------------------------------------------------------------------
# monitor


def _evict(samples: deque, window: float):
    last = samples[-1].timestamp
    while samples and samples[0].timestamp < last - window:
        samples.popleft()


def estimate_write_speed(samples: Sequence[SizeSample], window: float = 30.0) -> float:
    """Average write speed over the samples no older than ``window`` seconds."""
    if not samples:
        raise InsufficientData("no samples")
    kept = deque(samples)
    _evict(kept, window)
    if len(kept) < 2:
        raise InsufficientData("need two samples inside the window")
    first, last = kept[0], kept[-1]
    dt = last.timestamp - first.timestamp
    if dt <= 0:
        raise InsufficientData("samples share a timestamp")
    return (last.cumulative_bytes - first.cumulative_bytes) / dt


class WriteSpeedMonitor:
    """Sliding-window write-speed estimate for one partition."""

    def __init__(self, window: float = 30.0):
        self.window = window
        self.samples: deque[SizeSample] = deque()

    def push(self, sample: SizeSample):
        if self.samples and sample.timestamp < self.samples[-1].timestamp:
            raise InvariantViolation("size samples must be time ordered")
        if self.samples and sample.cumulative_bytes < self.samples[-1].cumulative_bytes:
            raise InvariantViolation("cumulative bytes cannot decrease")
        self.samples.append(sample)
        _evict(self.samples, self.window)

    def estimate(self) -> float:
        return estimate_write_speed(self.samples, self.window)


def monitor_convergence_time(old_rate: float, new_rate: float, window: float = 30.0,
                             sample_interval: float = 1.0, rtol: float = 1e-9) -> float:
    """Seconds after a step change until the windowed estimate equals the new rate."""
    mon = WriteSpeedMonitor(window)
    total = 0.0
    t = -window
    while t < 0:
        mon.push(SizeSample(0, total, t))
        total += old_rate * sample_interval
        t += sample_interval
    t = 0.0
    limit = 10 * window + sample_interval
    while t <= limit:
        mon.push(SizeSample(0, total, t))
        try:
            est = mon.estimate()
        except InsufficientData:
            est = math.nan
        if abs(est - new_rate) <= rtol * max(abs(new_rate), 1.0):
            return t
        total += new_rate * sample_interval
        t += sample_interval
    raise SimulationFault("monitor did not converge")


# --------------------------------------------------------------------------
# controller


class Phase(enum.Enum):
    SENTINEL = "sentinel"
    REASSIGN = "reassign_algorithm"
    GROUP_MANAGEMENT = "group_management"
    SYNCHRONIZE = "synchronize"


TRANSITIONS = {
    Phase.SENTINEL: {Phase.SENTINEL, Phase.REASSIGN},
    Phase.REASSIGN: {Phase.GROUP_MANAGEMENT},
    Phase.GROUP_MANAGEMENT: {Phase.SYNCHRONIZE},
    Phase.SYNCHRONIZE: {Phase.SENTINEL},
}


@dataclass(frozen=True)
class Measurement:
    speeds: tuple
    iteration: int
    time: float


@dataclass(frozen=True)
class Timer:
    time: float


@dataclass(frozen=True)
class Proceed:
    time: float


@dataclass(frozen=True)
class SyncReport:
    actual: AssignmentMatrix
    time: float


@dataclass(frozen=True)
class CreateConsumer:
    consumer: int


@dataclass(frozen=True)
class StopConsuming:
    partition: int
    consumer: int


@dataclass(frozen=True)
class StartConsuming:
    partition: int
    consumer: int


@dataclass(frozen=True)
class DeleteConsumer:
    consumer: int


@dataclass(frozen=True)
class ControllerConfig:
    packer: str = "mwf"
    capacity: float = 1.0
    # None disables the periodic re-evaluation exit
    reevaluate_secs: float | None = 30.0


@dataclass(frozen=True)
class ControllerState:
    phase: Phase
    perceived: AssignmentMatrix
    speeds: tuple | None = None
    iteration: int = 0
    desired: AssignmentMatrix | None = None
    last_reassign: float | None = None
    last_speeds: tuple | None = None
    pending: tuple = ()
    reconciled: bool = True

    @classmethod
    def initial(cls, n_partitions: int) -> "ControllerState":
        return cls(Phase.SENTINEL, AssignmentMatrix.empty(n_partitions, n_partitions))


def group_diff(current: AssignmentMatrix, desired: AssignmentMatrix) -> list:
    """Actions turning ``current`` into ``desired``: creates, stops, starts, deletes."""
    cur, new = current.owners, desired.owners
    cur_used = set(current.used_consumers())
    new_used = set(desired.used_consumers())
    actions: list = [CreateConsumer(c) for c in sorted(new_used - cur_used)]
    moved = [j for j in range(len(new)) if cur[j] != new[j]]
    actions += [StopConsuming(j, int(cur[j])) for j in moved if cur[j] >= 0]
    actions += [StartConsuming(j, int(new[j])) for j in moved if new[j] >= 0]
    actions += [DeleteConsumer(c) for c in sorted(cur_used - new_used)]
    return actions


def _overloaded(perceived: AssignmentMatrix, speeds, capacity: float) -> bool:
    loads = perceived.x @ np.asarray(speeds, dtype=float)
    return bool(np.any(loads > capacity * (1 + CAPACITY_RTOL)))


def _timer_due(state: ControllerState, now: float, cfg: ControllerConfig) -> bool:
    if cfg.reevaluate_secs is None or state.last_reassign is None:
        return False
    if now - state.last_reassign < cfg.reevaluate_secs:
        return False
    return state.speeds != state.last_speeds


def _goto(state: ControllerState, phase: Phase, **changes) -> ControllerState:
    if phase not in TRANSITIONS[state.phase]:
        raise ProtocolViolation(f"illegal transition {state.phase.value} -> {phase.value}")
    return replace(state, phase=phase, **changes)


def controller_step(state: ControllerState, event, cfg: ControllerConfig) -> tuple[ControllerState, list]:
    """Advance the controller by one input; returns the new state and emitted actions."""
    phase = state.phase
    if phase is Phase.SENTINEL:
        if isinstance(event, Measurement):
            state = replace(state, speeds=tuple(event.speeds), iteration=event.iteration)
            unassigned = bool(np.any(state.perceived.owners < 0))
            if (unassigned or _overloaded(state.perceived, state.speeds, cfg.capacity)
                    or _timer_due(state, event.time, cfg)):
                return _goto(state, Phase.REASSIGN, last_reassign=event.time,
                             last_speeds=state.speeds), []
            return state, []
        if isinstance(event, Timer):
            if state.speeds is not None and _timer_due(state, event.time, cfg):
                return _goto(state, Phase.REASSIGN, last_reassign=event.time,
                             last_speeds=state.speeds), []
            return state, []
        raise ProtocolViolation(f"sentinel cannot handle {type(event).__name__}")
    if phase is Phase.REASSIGN:
        if not isinstance(event, Proceed):
            raise ProtocolViolation(f"reassign cannot handle {type(event).__name__}")
        pack = make_packer(cfg.packer, cfg.capacity)
        prev = state.perceived if state.perceived.bins_used else None
        desired = pack(np.asarray(state.speeds), prev, state.iteration)
        return _goto(state, Phase.GROUP_MANAGEMENT, desired=desired), []
    if phase is Phase.GROUP_MANAGEMENT:
        if not isinstance(event, Proceed):
            raise ProtocolViolation(f"group management cannot handle {type(event).__name__}")
        actions = group_diff(state.perceived, state.desired)
        return _goto(state, Phase.SYNCHRONIZE, pending=tuple(actions)), actions
    if not isinstance(event, SyncReport):
        raise ProtocolViolation(f"synchronize cannot handle {type(event).__name__}")
    ok = event.actual.same_assignment(state.desired)
    actual = event.actual.with_iteration(state.iteration)
    return _goto(state, Phase.SENTINEL, perceived=actual, desired=None, pending=(),
                 reconciled=ok), []


# --------------------------------------------------------------------------
# consumers and broker


@dataclass(frozen=True)
class CreationDelayProfile:
    """Two-mode consumer start-up delay: mostly uniform, sometimes a bounded Pareto tail."""

    low: float = 10.0
    high: float = 50.0
    tail_weight: float = 0.12
    tail_max: float = 500.0
    tail_shape: float = 1.0


def sample_creation_delay(rng: np.random.Generator, profile: CreationDelayProfile = CreationDelayProfile()) -> float:
    if profile.tail_weight > 0 and rng.random() < profile.tail_weight:
        u = 1.0 - rng.random()
        lo, hi, a = profile.high, profile.tail_max, profile.tail_shape
        la, ha = lo ** a, hi ** a
        return float((-(u * ha - u * la - ha) / (ha * la)) ** (-1.0 / a))
    return float(rng.uniform(profile.low, profile.high))


class Broker:
    """Bytes produced into and consumed from each partition over time."""

    def __init__(self, speeds: np.ndarray, interval: float, saturated: bool = False):
        self.speeds = np.asarray(speeds, dtype=float)
        self.interval = interval
        self.saturated = saturated
        n_iter, n_part = self.speeds.shape
        self._cum = np.vstack([np.zeros(n_part), np.cumsum(self.speeds * interval, axis=0)])
        self.consumed = np.zeros(n_part)

    def _slot(self, t: float) -> int:
        return min(int(t // self.interval), self.speeds.shape[0] - 1)

    def rate(self, partitions: Iterable[int], t: float) -> float:
        row = self.speeds[self._slot(max(t, 0.0))]
        return float(sum(row[j] for j in partitions))

    def produced(self, j: int, t: float) -> float:
        if t <= 0:
            return 0.0
        n_iter = self.speeds.shape[0]
        k = int(t // self.interval)
        if k >= n_iter:
            return float(self._cum[n_iter, j] + (t - n_iter * self.interval) * self.speeds[-1, j])
        return float(self._cum[k, j] + (t - k * self.interval) * self.speeds[k, j])

    def available(self, partitions: Iterable[int], t: float) -> float:
        if self.saturated:
            return math.inf
        return float(sum(self.produced(j, t) - self.consumed[j] for j in partitions))

    def consume(self, partitions: Sequence[int], nbytes: float, t: float):
        if self.saturated:
            return
        for j in sorted(partitions):
            take = min(nbytes, self.produced(j, t) - self.consumed[j])
            if take > 0:
                self.consumed[j] += take
                nbytes -= take
            if nbytes <= 0:
                break


@dataclass
class _Message:
    kind: str  # "start" | "stop"
    partition: int
    arrival: float
    ack_delay: float
    on_ack: object = None


class ConsumerSim:
    """A consumer that fetches, processes, then drains its metadata inbox.

    Cycles are computed lazily: the consumer only advances when a message is
    delivered, which is exact because cycles depend on nothing but the
    consumer's own assignment and its partitions' backlog.
    """

    def __init__(self, cid: int, broker: Broker, ready_at: float, batch_size: float,
                 wait_time_secs: float, capacity: float, trace, stalled: bool = False):
        self.id = cid
        self.broker = broker
        self.batch_size = batch_size
        self.wait_time_secs = wait_time_secs
        self.capacity = capacity
        self.state: dict[int, str] = {}
        self.inbox: deque[_Message] = deque()
        self.last_end = ready_at
        self.trace = trace
        self.stalled = stalled
        self.cycles = 0

    @property
    def consuming(self) -> list[int]:
        return sorted(j for j, st in self.state.items() if st == "consuming")

    def cycle_duration(self, start: float) -> tuple[float, float]:
        """(fetch seconds, bytes fetched) for a cycle beginning at ``start``."""
        parts = self.consuming
        if not parts:
            return self.wait_time_secs, 0.0
        avail = self.broker.available(parts, start)
        if avail >= self.batch_size:
            return 0.0, self.batch_size
        rate = self.broker.rate(parts, start)
        if rate <= 0:
            fetch = self.wait_time_secs
        else:
            fetch = min((self.batch_size - avail) / rate, self.wait_time_secs)
        got = min(self.batch_size, self.broker.available(parts, start + fetch))
        return fetch, max(got, 0.0)

    def run_cycle(self) -> float:
        start = self.last_end
        fetch, got = self.cycle_duration(start)
        self.broker.consume(self.consuming, got, start + fetch)
        self.last_end = start + fetch + got / self.capacity
        self.cycles += 1
        return self.last_end

    def deliver(self, msg: _Message):
        """Queue a metadata message; it is applied at the first cycle end after arrival."""
        if self.stalled:
            return
        self.inbox.append(msg)
        if self.cycles > 0 and msg.arrival < self.last_end:
            # arrived during the latest computed cycle, whose end has not been acted on
            self.drain(self.last_end)
            return
        while self.run_cycle() <= msg.arrival:
            self.drain(self.last_end)
        self.drain(self.last_end)

    def drain(self, end: float):
        """Apply every queued message that arrived before the cycle end ``end``."""
        while self.inbox and self.inbox[0].arrival < end:
            self._apply(self.inbox.popleft(), end)

    def _apply(self, msg: _Message, t: float):
        actor = f"consumer-{self.id}"
        if msg.kind == "stop":
            self.state[msg.partition] = "stopped"
            self.trace(t, actor, "stop_applied", msg.partition, self.id)
            self.trace(t, actor, "stop_ack", msg.partition, self.id)
        else:
            self.state[msg.partition] = "consuming"
            self.trace(t, actor, "start_applied", msg.partition, self.id)
            self.trace(t, actor, "start_ack", msg.partition, self.id)
        if msg.on_ack is not None:
            msg.on_ack(t + msg.ack_delay, msg)


def rebalance_protocol(actions: Sequence, consumers: dict, clock: SimClock, trace,
                       network_delay: float = 0.0, timeout: float = 600.0,
                       iteration: int = 0) -> TimingRecord | None:
    """Run the stop-then-start exchange for every moved partition.

    Stops (and starts of partitions nobody held) go out at once; the start of
    a moved partition is sent only once its stop has been acknowledged.
    Returns the dt4 record, or None when there was nothing to send.
    """
    stops = {a.partition: a for a in actions if isinstance(a, StopConsuming)}
    starts = {a.partition: a for a in actions if isinstance(a, StartConsuming)}
    if not stops and not starts:
        return None
    t0 = clock.now
    heap: list = []
    seq = itertools.count()
    acked_stop: set[int] = set()

    def on_ack(t, msg):
        heapq.heappush(heap, (t, next(seq), msg))

    def send(t, kind, partition, consumer):
        if consumer not in consumers:
            raise ProtocolViolation(f"{kind} for partition {partition} to missing consumer {consumer}")
        if kind == "start" and partition in stops and partition not in acked_stop:
            raise ProtocolViolation(f"start for partition {partition} before its stop was acknowledged")
        trace(t, "controller", f"{kind}_sent", partition, consumer)
        consumers[consumer].deliver(_Message(kind, partition, t + network_delay, network_delay, on_ack))

    for j in sorted(stops):
        send(t0, "stop", j, stops[j].consumer)
    for j in sorted(starts):
        if j not in stops:
            send(t0, "start", j, starts[j].consumer)

    outstanding = len(stops) + len(starts)
    last = t0
    while outstanding:
        if not heap:
            raise SimulationFault(f"no acknowledgement within {timeout}s at iteration {iteration}")
        t, _, msg = heapq.heappop(heap)
        if t - t0 > timeout:
            raise SimulationFault(f"no acknowledgement within {timeout}s at iteration {iteration}")
        last = t
        outstanding -= 1
        trace(t, "controller", f"{msg.kind}_ack_received", msg.partition, -1)
        if msg.kind == "stop":
            acked_stop.add(msg.partition)
            if msg.partition in starts:
                send(t, "start", msg.partition, starts[msg.partition].consumer)
    clock.advance_to(max(clock.now, last))
    return TimingRecord(DT4, last - t0, iteration)


def consumer_cycle(c: ConsumerSim, clock: SimClock) -> list[TraceEvent]:
    """Run one cycle of ``c`` from its last cycle end and drain its inbox.

    Returns the trace events the cycle produced; the shared clock is moved to
    the cycle end when that is later than the current time.
    """
    events: list[TraceEvent] = []

    def record(t, actor, kind, partition=-1, consumer=-1):
        events.append(TraceEvent(t, actor, kind, partition, consumer))

    old_trace = c.trace
    c.trace = record
    try:
        start = c.last_end
        end = c.run_cycle()
        record(start, f"consumer-{c.id}", "cycle_start", -1, c.id)
        c.drain(end)
        record(end, f"consumer-{c.id}", "cycle_end", -1, c.id)
    finally:
        c.trace = old_trace
    clock.advance_to(max(clock.now, end))
    return events


# --------------------------------------------------------------------------
# whole-system simulation


@dataclass(frozen=True)
class SimConfig:
    consumer_capacity: float = 2e6
    batch_size: float = 5e6
    wait_time_secs: float = 1.0
    measurement_interval: float = 30.0
    rebalance_secs: float = 5.0
    # stream units -> bytes/s; None maps the stream capacity onto the drain bound
    bytes_per_unit: float | None = None
    saturated: bool = False
    reevaluate_secs: float | None = 30.0
    # fixed packer cost keeps runs reproducible; None measures wall time instead
    compute_secs: float | None = 0.05
    create_request_secs: float = 0.01
    creation: CreationDelayProfile = CreationDelayProfile()
    network_delay_secs: float = 0.0
    ack_timeout_secs: float = 600.0
    live_monitor: bool = False
    monitor_window: float = 30.0
    monitor_sample_interval: float = 1.0
    stalled_consumers: frozenset = frozenset()


@dataclass
class SimResult:
    timings: list[TimingRecord]
    trace: list[TraceEvent]
    metrics: list[IterationMetrics]
    reassignments: list[int]
    unreconciled: list[int]
    final: AssignmentMatrix
    assignments: dict = field(default_factory=dict)

    def durations(self, event: str) -> list[float]:
        return [r.duration for r in self.timings if r.event == event]


class Simulation:
    def __init__(self, stream: MeasurementStream, packer: str = "mwf",
                 config: SimConfig = SimConfig(), seed: int = 0):
        self.stream = stream
        self.packer = packer
        self.config = config
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.clock = SimClock()
        scale = config.bytes_per_unit
        if scale is None:
            bound = bin_capacity_bound(config.consumer_capacity, config.measurement_interval,
                                       config.rebalance_secs)
            scale = bound / stream.capacity
        self.scale = scale
        self.broker = Broker(stream.speeds * scale, config.measurement_interval, config.saturated)
        self.consumers: dict[int, ConsumerSim] = {}
        self._trace: list[tuple] = []
        self._seq = itertools.count()
        self.ctl_cfg = ControllerConfig(packer, stream.capacity, config.reevaluate_secs)

    def trace(self, t, actor, kind, partition=-1, consumer=-1):
        self._trace.append((t, next(self._seq), TraceEvent(t, actor, kind, partition, consumer)))

    def _actual(self) -> AssignmentMatrix:
        n = self.stream.n_partitions
        owners = [-1] * n
        for cid, c in self.consumers.items():
            for j in c.consuming:
                owners[j] = cid
        return AssignmentMatrix.from_owners(owners, n)

    def _set_phase(self, state, new_state):
        if new_state.phase is not state.phase:
            self.trace(self.clock.now, "controller", f"phase:{new_state.phase.value}")

    def run(self) -> SimResult:
        cfg = self.config
        stream = self.stream
        state = ControllerState.initial(stream.n_partitions)
        timings: list[TimingRecord] = []
        metrics: list[IterationMetrics] = []
        reassignments: list[int] = []
        unreconciled: list[int] = []
        assignments: dict[int, AssignmentMatrix] = {}
        dt1 = 0.0
        if cfg.live_monitor:
            dt1 = monitor_convergence_time(0.0, 1.0, cfg.monitor_window, cfg.monitor_sample_interval)

        for k in range(1, stream.n_iterations + 1):
            published = (k - 1) * cfg.measurement_interval + dt1
            self.clock.advance_to(max(self.clock.now, published))
            if cfg.live_monitor:
                timings.append(TimingRecord(DT1, dt1, k))
            speeds = stream.speeds[k - 1]
            self.trace(self.clock.now, "monitor", "measurement")
            new_state, _ = controller_step(state, Measurement(tuple(speeds.tolist()), k, self.clock.now),
                                           self.ctl_cfg)
            self._set_phase(state, new_state)
            state = new_state
            if state.phase is Phase.SENTINEL:
                continue
            before = state.perceived
            reassignments.append(k)

            t_wall = time.perf_counter()
            new_state, _ = controller_step(state, Proceed(self.clock.now), self.ctl_cfg)
            compute = time.perf_counter() - t_wall
            self._set_phase(state, new_state)
            state = new_state
            new_state, actions = controller_step(state, Proceed(self.clock.now), self.ctl_cfg)
            self._set_phase(state, new_state)
            state = new_state
            desired = state.desired
            assignments[k] = desired
            metrics.append(IterationMetrics(
                self.packer, k, desired.bins_used,
                rscore(migrations_between(before if before.bins_used else None, desired),
                       speeds, stream.capacity),
            ))

            creates = [a for a in actions if isinstance(a, CreateConsumer)]
            if cfg.compute_secs is not None:
                compute = cfg.compute_secs
            dt2 = compute + cfg.create_request_secs * len(creates)
            self.clock.advance_to(self.clock.now + dt2)
            timings.append(TimingRecord(DT2, dt2, k))

            ready_at = self.clock.now
            for a in creates:
                self.trace(self.clock.now, "controller", "create", -1, a.consumer)
                delay = sample_creation_delay(self.rng, cfg.creation)
                timings.append(TimingRecord(DT3, delay, k))
                t_ready = self.clock.now + delay
                self.consumers[a.consumer] = ConsumerSim(
                    a.consumer, self.broker, t_ready, cfg.batch_size, cfg.wait_time_secs,
                    cfg.consumer_capacity, self.trace, a.consumer in cfg.stalled_consumers,
                )
                self.trace(t_ready, f"consumer-{a.consumer}", "ready", -1, a.consumer)
                ready_at = max(ready_at, t_ready)
            self.clock.advance_to(ready_at)

            rec = rebalance_protocol(actions, self.consumers, self.clock, self.trace,
                                     cfg.network_delay_secs, cfg.ack_timeout_secs, k)
            if rec is not None:
                timings.append(rec)

            for a in actions:
                if isinstance(a, DeleteConsumer):
                    c = self.consumers[a.consumer]
                    if c.consuming:
                        raise ProtocolViolation(
                            f"deleting consumer {a.consumer} that still consumes {c.consuming}"
                        )
                    del self.consumers[a.consumer]
                    self.trace(self.clock.now, "controller", "delete", -1, a.consumer)

            new_state, _ = controller_step(state, SyncReport(self._actual(), self.clock.now),
                                           self.ctl_cfg)
            self._set_phase(state, new_state)
            state = new_state
            if not state.reconciled:
                unreconciled.append(k)
            if not state.perceived.same_assignment(self._actual()):
                raise InvariantViolation(f"perceived state differs from consumers at iteration {k}")

        trace = [e for _, _, e in sorted(self._trace, key=lambda r: (r[0], r[1]))]
        return SimResult(timings, trace, metrics, reassignments, unreconciled,
                         state.perceived, assignments)


def run_simulation(stream: MeasurementStream, packer: str = "mwf", config: SimConfig = SimConfig(),
                   seed: int = 0) -> SimResult:
    return Simulation(stream, packer, config, seed).run()


# --------------------------------------------------------------------------
# trace checks


@dataclass(frozen=True)
class TraceCheck:
    mutual_exclusion: tuple = ()
    ordering: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.mutual_exclusion and not self.ordering


def check_trace(trace: Iterable[TraceEvent]) -> TraceCheck:
    """Scan a time-ordered trace for double consumption and premature starts."""
    holder: dict[int, int] = {}
    awaiting: dict[int, int] = {}
    exclusion, ordering = [], []
    for ev in trace:
        j = ev.partition
        if ev.kind == "start_applied":
            if j in holder and holder[j] != ev.consumer:
                exclusion.append(ev)
            holder[j] = ev.consumer
        elif ev.kind == "stop_applied":
            if holder.get(j) == ev.consumer:
                del holder[j]
        elif ev.kind == "stop_sent":
            awaiting[j] = ev.consumer
        elif ev.kind == "stop_ack_received":
            awaiting.pop(j, None)
        elif ev.kind == "start_sent":
            if j in awaiting or (j in holder and holder[j] != ev.consumer):
                ordering.append(ev)
    return TraceCheck(tuple(exclusion), tuple(ordering))

"""
Discrete-event simulation of decentralized self-scheduling.

Idle PEs pay a claim message round trip, take the next chunk from the shared
scheduler state when the reply arrives and execute it at the speed their
availability trace allows. One run is single-threaded and deterministic.
"""

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import TYPE_CHECKING, List, NamedTuple, Optional, Sequence, Tuple, Union

from .errors import ConfigurationError
from .logging_config import get_logger
from .platform import PlatformModel, PlatformSummary, summarize_platform, transfer_time
from .sched import (
    Feedback,
    SchedulerState,
    TechniqueKind,
    init_state,
    next_chunk,
    record_feedback,
)
from .workload import Workload, WorkloadStats, workload_stats

if TYPE_CHECKING:
    from .sil import SelectionRecord, SiLConfig

logger = get_logger(__name__)

CHUNK_LOG_HEADER = ["pe", "t_request", "t_assign", "start", "size", "t_complete", "technique"]


class EventKind(IntEnum):
    # equal timestamps: controller tick, then completions, then claim replies
    SIL_TICK = 0
    CHUNK_COMPLETE = 1
    REQUEST_COMPLETE = 2


class Event(NamedTuple):
    t: float
    kind: EventKind
    pe: int
    seq: int


@dataclass(frozen=True)
class ChunkLogEntry:
    pe: int
    t_request: float
    t_assign: float
    start: int
    size: int
    t_complete: float
    technique: TechniqueKind


@dataclass
class PeStats:
    busy: float = 0.0
    idle: float = 0.0
    overhead: float = 0.0
    chunks: int = 0
    iterations: int = 0
    claims: int = 0


@dataclass(frozen=True)
class InFlightChunk:
    start: int
    size: int
    flops: float
    t_request: float
    t_assign: float
    rt: float
    technique: TechniqueKind


@dataclass(frozen=True)
class PeStart:
    """
    Condition of one PE when a simulation starts mid-loop.

    kind is "free" (claims at ``at``), "request" (reply arrives at ``at``)
    or "busy" (``chunk`` completes at ``at``).
    """

    kind: str
    at: float
    t_issue: float = 0.0
    rt: float = 0.0
    chunk: Optional[InFlightChunk] = None


@dataclass(frozen=True)
class InitialState:
    scheduled: int = 0
    state: Optional[SchedulerState] = None
    t0: float = 0.0
    pe_starts: Optional[Tuple[PeStart, ...]] = None


@dataclass(frozen=True)
class SimConfig:
    workload: Workload
    platform: PlatformModel
    technique: TechniqueKind = TechniqueKind.SS
    sil: Optional["SiLConfig"] = None
    initial: Optional[InitialState] = None
    seed: int = 0
    claim_legs: int = 2
    stats: Optional[WorkloadStats] = None
    summary: Optional[PlatformSummary] = None
    log_chunks: bool = True

    def __post_init__(self):
        if self.workload.n < 1:
            raise ConfigurationError("cannot simulate an empty loop", field="workload")
        if self.claim_legs not in (1, 2):
            raise ConfigurationError("claim_legs must be 1 or 2", field="claim_legs")
        if self.initial is not None and not 0 <= self.initial.scheduled < self.workload.n:
            raise ConfigurationError(
                f"scheduled offset {self.initial.scheduled} outside [0, {self.workload.n})",
                field="initial",
            )


@dataclass
class SimResult:
    makespan: float
    per_pe: List[PeStats]
    chunk_log: List[ChunkLogEntry]
    technique_timeline: List[Tuple[float, TechniqueKind]]
    selections: List["SelectionRecord"] = field(default_factory=list)

    @property
    def total_overhead(self) -> float:
        return math.fsum(stats.overhead for stats in self.per_pe)

    @property
    def chunk_count(self) -> int:
        return sum(stats.chunks for stats in self.per_pe)

    @property
    def iterations(self) -> int:
        return sum(stats.iterations for stats in self.per_pe)

    @property
    def switch_count(self) -> int:
        return sum(1 for (_, a), (_, b) in zip(self.technique_timeline, self.technique_timeline[1:]) if a != b)


def integrate_flops(core: int, t_start: float, flops: float, platform: PlatformModel) -> float:
    """
    Time at which ``core`` has delivered ``flops`` starting from ``t_start``

    Walks the piecewise-constant availability trace segment by segment.
    """
    if flops <= 0:
        return t_start
    speed = platform.cores[core].speed
    remaining = flops
    for start, end, factor in platform.avail_traces[core].segments(t_start):
        rate = speed * factor
        if end == math.inf:
            return start + remaining / rate
        capacity = rate * (end - start)
        if capacity >= remaining:
            return start + remaining / rate
        remaining -= capacity
    raise AssertionError("availability trace ended")


def delivered_flops(core: int, t_start: float, t_end: float, platform: PlatformModel) -> float:
    """FLOP delivered by ``core`` over [t_start, t_end)"""
    if t_end <= t_start:
        return 0.0
    speed = platform.cores[core].speed
    total = []
    for start, end, factor in platform.avail_traces[core].segments(t_start):
        stop = min(end, t_end)
        total.append(speed * factor * (stop - start))
        if stop >= t_end:
            break
    return math.fsum(total)


@dataclass
class _Request:
    t_issue: float
    done: float
    rt: float


@dataclass
class _Busy:
    chunk: InFlightChunk
    t_end: float
    logged: bool


@dataclass
class _Idle:
    since: float


class Simulation:
    """
    One simulated execution of the loop.

    ``controller`` (optional) receives ``attach(sim)`` before the first event
    and ``on_tick(sim, t)`` for every SIL_TICK event it scheduled.
    """

    def __init__(self, cfg: SimConfig, controller=None, flops: Optional[List[float]] = None):
        self.cfg = cfg
        self.platform = cfg.platform
        self.workload = cfg.workload
        self.N = cfg.workload.n
        self.P = cfg.platform.size
        self.flops = flops if flops is not None else cfg.workload.flops.tolist()
        self.stats = cfg.stats or workload_stats(cfg.workload)
        self.summary = cfg.summary or summarize_platform(cfg.platform, cfg.claim_legs)
        self.controller = controller

        initial = cfg.initial or InitialState()
        self.t0 = initial.t0
        if initial.state is not None:
            self.state = initial.state
        else:
            self.state = init_state(cfg.technique, self.N, self.P, self.stats, self.summary, initial.scheduled)
        if initial.pe_starts is not None and len(initial.pe_starts) != self.P:
            raise ConfigurationError("need one start condition per PE", field="initial")
        self._pe_starts = initial.pe_starts

        self.active = self.state.kind
        self.now = self.t0
        self.makespan = self.t0
        self.queue: List[Event] = []
        self._seq = itertools.count()
        self.per_pe = [PeStats() for _ in range(self.P)]
        self.chunk_log: List[ChunkLogEntry] = []
        self.timeline: List[Tuple[float, TechniqueKind]] = [(self.t0, self.active)]
        self.history: List[Feedback] = []
        self.last_feedback: List[Optional[Feedback]] = [None] * self.P
        self.last_round_trip: Optional[float] = None
        self.phase: list = [None] * self.P
        self._unanswered: List[Tuple[int, _Request]] = []

    def push(self, t: float, kind: EventKind, pe: int = -1) -> None:
        heapq.heappush(self.queue, Event(t, kind, pe, next(self._seq)))

    def round_trip(self, t: float) -> float:
        return self.cfg.claim_legs * transfer_time(self.platform, t)

    def issue_request(self, pe: int, t: float) -> None:
        rt = self.round_trip(t)
        request = _Request(t_issue=t, done=t + rt, rt=rt)
        self.phase[pe] = request
        self.push(request.done, EventKind.REQUEST_COMPLETE, pe)

    def switch_technique(self, state: SchedulerState, t: float) -> None:
        """Replace the scheduler for every later claim; idle PEs claim again"""
        self.state = state
        self.active = state.kind
        for pe, phase in enumerate(self.phase):
            if isinstance(phase, _Idle):
                self.issue_request(pe, t)

    def _start(self) -> None:
        for pe in range(self.P):
            start = self._pe_starts[pe] if self._pe_starts is not None else None
            if start is None or start.kind == "free":
                self.issue_request(pe, start.at if start is not None else self.t0)
            elif start.kind == "request":
                self.phase[pe] = _Request(t_issue=start.t_issue, done=start.at, rt=start.rt)
                self.push(start.at, EventKind.REQUEST_COMPLETE, pe)
            elif start.kind == "busy":
                self.phase[pe] = _Busy(chunk=start.chunk, t_end=start.at, logged=False)
                self.push(start.at, EventKind.CHUNK_COMPLETE, pe)
            else:
                raise ConfigurationError(f"unknown PE start kind '{start.kind}'", field="initial")

    def _on_request_complete(self, pe: int, t: float) -> None:
        request = self.phase[pe]
        self.last_round_trip = request.rt
        claim = next_chunk(self.state, pe, t)
        if claim is None:
            self.phase[pe] = _Idle(since=t)
            self._unanswered.append((pe, request))
            return

        start, size = claim
        flops = math.fsum(self.flops[start:start + size])
        t_end = integrate_flops(pe, t, flops, self.platform)
        stats = self.per_pe[pe]
        stats.overhead += t - max(request.t_issue, self.t0)
        stats.claims += 1
        chunk = InFlightChunk(
            start=start,
            size=size,
            flops=flops,
            t_request=request.t_issue,
            t_assign=t,
            rt=request.rt,
            technique=self.active,
        )
        self.phase[pe] = _Busy(chunk=chunk, t_end=t_end, logged=True)
        self.push(t_end, EventKind.CHUNK_COMPLETE, pe)

    def _on_chunk_complete(self, pe: int, t: float) -> None:
        busy = self.phase[pe]
        chunk = busy.chunk
        exec_time = t - chunk.t_assign
        feedback = Feedback(pe=pe, chunk_size=chunk.size, exec_time=exec_time, total_time=exec_time + chunk.rt)
        record_feedback(self.state, feedback)
        self.history.append(feedback)
        self.last_feedback[pe] = feedback

        stats = self.per_pe[pe]
        stats.busy += t - max(chunk.t_assign, self.t0)
        if busy.logged:
            stats.chunks += 1
            stats.iterations += chunk.size
            if self.cfg.log_chunks:
                self.chunk_log.append(ChunkLogEntry(
                    pe=pe,
                    t_request=chunk.t_request,
                    t_assign=chunk.t_assign,
                    start=chunk.start,
                    size=chunk.size,
                    t_complete=t,
                    technique=chunk.technique,
                ))
        self.makespan = max(self.makespan, t)
        self.issue_request(pe, t)

    def run(self) -> SimResult:
        self._start()
        if self.controller is not None:
            self.controller.attach(self)

        while self.queue:
            t, kind, pe, _ = heapq.heappop(self.queue)
            self.now = t
            if kind == EventKind.REQUEST_COMPLETE:
                self._on_request_complete(pe, t)
            elif kind == EventKind.CHUNK_COMPLETE:
                self._on_chunk_complete(pe, t)
            else:
                self.controller.on_tick(self, t)

        span = self.makespan - self.t0
        for pe, request in self._unanswered:
            # a claim that found no work counts up to the end of the loop only
            paid = min(request.done, self.makespan) - max(request.t_issue, self.t0)
            if paid > 0:
                self.per_pe[pe].overhead += paid
        for stats in self.per_pe:
            stats.idle = max(span - stats.busy - stats.overhead, 0.0)

        logger.debug(
            "%s: N=%d P=%d scheduled from %d, makespan %.6f s",
            self.timeline[0][1].value, self.N, self.P, self.cfg.initial.scheduled if self.cfg.initial else 0,
            self.makespan,
        )
        return SimResult(
            makespan=self.makespan,
            per_pe=self.per_pe,
            chunk_log=self.chunk_log,
            technique_timeline=self.timeline,
        )


def simulate(cfg: SimConfig) -> SimResult:
    """Run one simulation; a config carrying a SiL wrapper runs the controller"""
    if cfg.sil is not None:
        from .sil import run_with_sil
        return run_with_sil(cfg, cfg.sil)
    return Simulation(cfg).run()


def write_chunk_log(entries: Sequence[ChunkLogEntry], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CHUNK_LOG_HEADER)
        for e in entries:
            writer.writerow([e.pe, repr(e.t_request), repr(e.t_assign), e.start, e.size,
                             repr(e.t_complete), e.technique.value])

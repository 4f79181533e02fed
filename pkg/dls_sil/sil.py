"""
Simulation-in-the-loop technique selection.

A controller inside the running simulation wakes up every ``period``
seconds, freezes what it observes about the machine, simulates the rest of
the loop once per candidate technique and switches to the fastest one.
"""

import copy
import csv
import math
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .errors import ConfigurationError
from .logging_config import get_logger
from .platform import PlatformModel, Trace, TraceKind
from .sched import Feedback, SchedulerState, TechniqueKind, init_state, seed_state
from .simengine import (
    EventKind,
    InitialState,
    PeStart,
    SimConfig,
    Simulation,
    SimResult,
    _Busy,
    _Request,
    delivered_flops,
)

logger = get_logger(__name__)

DEFAULT_SIL_PERIOD = 50.0


class MonitorMode(str, Enum):
    GROUND_TRUTH = "ground-truth"
    ESTIMATED = "estimated"


class HorizonMode(str, Enum):
    FREEZE = "freeze-current-state"


@dataclass(frozen=True)
class SiLConfig:
    period: float = DEFAULT_SIL_PERIOD
    candidates: Tuple[TechniqueKind, ...] = tuple(TechniqueKind)
    monitor_mode: MonitorMode = MonitorMode.GROUND_TRUTH
    horizon_mode: HorizonMode = HorizonMode.FREEZE

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigurationError(f"SiL period must be positive, got {self.period}", field="period")
        candidates = tuple(TechniqueKind(c) for c in self.candidates)
        if not candidates:
            raise ConfigurationError("SiL needs at least one candidate technique", field="candidates")
        if len(set(candidates)) != len(candidates):
            raise ConfigurationError("SiL candidates must be distinct", field="candidates")
        object.__setattr__(self, "candidates", candidates)
        object.__setattr__(self, "monitor_mode", MonitorMode(self.monitor_mode))
        object.__setattr__(self, "horizon_mode", HorizonMode(self.horizon_mode))


@dataclass(frozen=True)
class MonitorSnapshot:
    t_now: float
    remaining_start: int
    observed_speed: Tuple[float, ...]
    bw_factor: float
    lat_factor: float
    pe_starts: Tuple[PeStart, ...]
    technique_states: Tuple[SchedulerState, ...]
    history: Tuple[Feedback, ...]


@dataclass(frozen=True)
class SelectionRecord:
    t: float
    selected: TechniqueKind
    predictions: Tuple[Tuple[TechniqueKind, float], ...]
    wall_seconds: float
    switched: bool


def _estimated_network(sim: Simulation) -> Tuple[float, float]:
    """Bandwidth and latency factors inferred from the last claim round trip"""
    network = sim.platform.network
    rt = sim.last_round_trip
    if rt is None or network.latency0 == 0 or network.latency_mode != "divide":
        return 1.0, 1.0
    # any excess over the nominal message time is charged to latency
    latency = rt / sim.cfg.claim_legs - network.msg_bits / network.bandwidth0
    if latency <= network.latency0:
        return 1.0, 1.0
    return 1.0, network.latency0 / latency


def take_snapshot(sim: Simulation, mode: MonitorMode = MonitorMode.GROUND_TRUTH) -> MonitorSnapshot:
    """Freeze the current state of a running simulation"""
    t = sim.now
    platform = sim.platform
    if mode == MonitorMode.GROUND_TRUTH:
        speeds = tuple(core.speed * platform.avail_traces[i].value_at(t) for i, core in enumerate(platform.cores))
        bw_factor = platform.bw_trace.value_at(t)
        lat_factor = platform.lat_trace.value_at(t)
    else:
        speeds = tuple(
            fb.chunk_size * sim.stats.mu_flop / fb.exec_time if fb is not None else core.speed
            for core, fb in zip(platform.cores, sim.last_feedback)
        )
        bw_factor, lat_factor = _estimated_network(sim)

    starts = []
    for pe, phase in enumerate(sim.phase):
        if isinstance(phase, _Request):
            starts.append(PeStart(kind="request", at=phase.done, t_issue=phase.t_issue, rt=phase.rt))
        elif isinstance(phase, _Busy):
            chunk = phase.chunk
            if mode == MonitorMode.GROUND_TRUTH:
                _, piece_end, _ = next(platform.avail_traces[pe].segments(chunk.t_assign))
                if piece_end > t:
                    # same rate since the assignment: the completion the engine computed
                    busy_until = chunk.t_assign + chunk.flops / speeds[pe]
                else:
                    left = max(chunk.flops - delivered_flops(pe, chunk.t_assign, t, platform), 0.0)
                    busy_until = t + left / speeds[pe]
            else:
                busy_until = max(t, chunk.t_assign + chunk.size * sim.stats.mu_flop / speeds[pe])
            starts.append(PeStart(kind="busy", at=busy_until, chunk=chunk))
        else:
            starts.append(PeStart(kind="free", at=t))

    return MonitorSnapshot(
        t_now=t,
        remaining_start=sim.state.scheduled,
        observed_speed=speeds,
        bw_factor=bw_factor,
        lat_factor=lat_factor,
        pe_starts=tuple(starts),
        technique_states=(copy.deepcopy(sim.state),),
        history=tuple(sim.history),
    )


def frozen_platform(p: PlatformModel, snapshot: MonitorSnapshot) -> PlatformModel:
    """The machine as observed at the snapshot, held constant for all later times"""
    network = p.network
    if network.latency_mode == "divide":
        latency0 = network.latency0 / snapshot.lat_factor
    else:
        latency0 = network.latency0 * snapshot.lat_factor
    return PlatformModel(
        cores=tuple(replace(core, speed=speed) for core, speed in zip(p.cores, snapshot.observed_speed)),
        network=replace(network, latency0=latency0, bandwidth0=network.bandwidth0 * snapshot.bw_factor),
        avail_traces=(Trace.constant(TraceKind.AVAILABILITY),) * p.size,
        bw_trace=Trace.constant(TraceKind.BANDWIDTH),
        lat_trace=Trace.constant(TraceKind.LATENCY),
    )


def fresh_state(sim: Simulation, kind: TechniqueKind, snapshot: MonitorSnapshot) -> SchedulerState:
    """Fresh state of ``kind`` for the unscheduled iterations, seeded with measured chunks"""
    state = init_state(kind, sim.N, sim.P, sim.stats, sim.summary, scheduled=snapshot.remaining_start)
    return seed_state(state, snapshot.history)


def candidate_state(sim: Simulation, kind: TechniqueKind, snapshot: MonitorSnapshot) -> SchedulerState:
    """
    State a candidate continues the loop with

    The active technique keeps running on a copy of its live state, any
    other candidate starts fresh.
    """
    for state in snapshot.technique_states:
        if state.kind == kind:
            return copy.deepcopy(state)
    return fresh_state(sim, kind, snapshot)


def predict_makespan(sim: Simulation, kind: TechniqueKind, snapshot: MonitorSnapshot,
                     platform: Optional[PlatformModel] = None) -> float:
    """Makespan of the rest of the loop under ``kind`` on the frozen machine"""
    cfg = SimConfig(
        workload=sim.workload,
        platform=platform or frozen_platform(sim.platform, snapshot),
        technique=kind,
        initial=InitialState(
            scheduled=snapshot.remaining_start,
            state=candidate_state(sim, kind, snapshot),
            t0=snapshot.t_now,
            pe_starts=snapshot.pe_starts,
        ),
        claim_legs=sim.cfg.claim_legs,
        stats=sim.stats,
        summary=sim.summary,
        log_chunks=False,
    )
    return Simulation(cfg, flops=sim.flops).run().makespan


def select_technique(
        sim: Simulation,
        snapshot: MonitorSnapshot,
        candidates: Sequence[TechniqueKind],
) -> Tuple[TechniqueKind, Tuple[Tuple[TechniqueKind, float], ...]]:
    """
    Simulate every candidate from the snapshot and pick the smallest prediction

    Ties go to the earlier candidate. A candidate that cannot be configured
    for this machine predicts an infinite makespan.
    """
    platform = frozen_platform(sim.platform, snapshot)
    predictions = []
    for kind in candidates:
        try:
            predicted = predict_makespan(sim, kind, snapshot, platform)
        except ConfigurationError as e:
            logger.warning("t=%.3f: skipping %s: %s", snapshot.t_now, kind.value, e)
            predicted = math.inf
        predictions.append((kind, predicted))

    best, best_time = predictions[0]
    for kind, predicted in predictions[1:]:
        if predicted < best_time:
            best, best_time = kind, predicted
    if best_time == math.inf:
        raise ConfigurationError("no candidate technique can be configured for this platform", field="candidates")
    return best, tuple(predictions)


class SiLController:
    """Periodic selector driven by SIL_TICK events of a live simulation"""

    def __init__(self, cfg: SiLConfig):
        self.cfg = cfg
        self.records: List[SelectionRecord] = []

    def attach(self, sim: Simulation) -> None:
        sim.timeline.clear()
        sim.push(sim.t0, EventKind.SIL_TICK)

    def on_tick(self, sim: Simulation, t: float) -> None:
        if sim.state.remaining <= 0:
            return
        started = time.perf_counter()
        snapshot = take_snapshot(sim, self.cfg.monitor_mode)
        selected, predictions = select_technique(sim, snapshot, self.cfg.candidates)
        elapsed = time.perf_counter() - started

        switched = selected != sim.active
        if switched:
            sim.switch_technique(fresh_state(sim, selected, snapshot), t)
        sim.timeline.append((t, selected))
        self.records.append(SelectionRecord(
            t=t,
            selected=selected,
            predictions=predictions,
            wall_seconds=elapsed,
            switched=switched,
        ))
        logger.info(
            "t=%.3f: %s selected, predicted makespan %.3f s (%d iterations left, %.3f s of selection)",
            t, selected.value, dict(predictions)[selected], sim.state.remaining, elapsed,
        )
        sim.push(t + self.cfg.period, EventKind.SIL_TICK)


def run_with_sil(cfg: SimConfig, sil_cfg: Optional[SiLConfig] = None) -> SimResult:
    """
    Run a simulation whose technique is chosen online by the SiL controller

    The first selection happens at the start of the loop, then one every
    ``sil_cfg.period`` seconds while iterations remain unscheduled.
    """
    sil_cfg = sil_cfg or cfg.sil or SiLConfig()
    # placeholder until the selection at t0, which runs before any claim is answered
    live = replace(cfg, technique=TechniqueKind.SS, sil=None)
    controller = SiLController(sil_cfg)
    result = Simulation(live, controller).run()
    result.selections = list(controller.records)
    switches = sum(1 for record in controller.records[1:] if record.switched)
    logger.info(
        "SiL run finished at %.3f s after %d selections and %d switches",
        result.makespan, len(controller.records), switches,
    )
    return result


def write_selection_log(
        records: Sequence[SelectionRecord],
        candidates: Sequence[TechniqueKind],
        path: Union[str, Path],
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", "selected"] + [kind.value for kind in candidates])
        for record in records:
            predicted = dict(record.predictions)
            writer.writerow([repr(record.t), record.selected.value]
                            + [repr(predicted.get(kind, math.inf)) for kind in candidates])

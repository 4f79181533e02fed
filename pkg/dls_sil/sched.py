"""
Loop scheduling techniques as stateful chunk-size calculators.

Every technique answers the same two calls: ``next_chunk`` claims the next
block of iterations for a PE, ``record_feedback`` reports how long a finished
chunk took. Nonadaptive techniques ignore the feedback.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ConfigurationError
from .workload import WorkloadStats


class TechniqueKind(str, Enum):
    STATIC = "STATIC"
    SS = "SS"
    FSC = "FSC"
    GSS = "GSS"
    FAC = "FAC"
    WF = "WF"
    AWF_B = "AWF-B"
    AWF_C = "AWF-C"
    AWF_D = "AWF-D"
    AWF_E = "AWF-E"
    AF = "AF"


ADAPTIVE_WEIGHTED = frozenset(
    {TechniqueKind.AWF_B, TechniqueKind.AWF_C, TechniqueKind.AWF_D, TechniqueKind.AWF_E}
)
BATCH_UPDATED = frozenset({TechniqueKind.AWF_B, TechniqueKind.AWF_D})
TOTAL_TIME_BASED = frozenset({TechniqueKind.AWF_D, TechniqueKind.AWF_E})
ADAPTIVE = ADAPTIVE_WEIGHTED | {TechniqueKind.AF}
FACTORING = ADAPTIVE_WEIGHTED | {TechniqueKind.FAC, TechniqueKind.WF}


def technique(name: str) -> TechniqueKind:
    """Parse a technique name such as 'AWF-C'"""
    try:
        return TechniqueKind(name.strip().upper())
    except ValueError:
        names = ", ".join(kind.value for kind in TechniqueKind)
        raise ConfigurationError(f"unknown technique '{name}' (expected one of {names})", field="technique")


@dataclass(frozen=True)
class Feedback:
    pe: int
    chunk_size: int
    exec_time: float
    total_time: float

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError(f"feedback chunk size must be at least 1, got {self.chunk_size}")
        if not self.exec_time > 0:
            raise ValueError(f"feedback exec_time must be positive, got {self.exec_time}")
        if self.total_time < self.exec_time:
            raise ValueError("feedback total_time is smaller than exec_time")


@dataclass
class SchedulerState:
    kind: TechniqueKind
    N: int
    scheduled: int
    P: int
    static_weights: List[float]
    h: float
    mu_time: float
    sigma_time: float
    static_chunk: int = 0
    static_served: set = field(default_factory=set)
    fsc_chunk: int = 0
    batch_index: int = 0
    batch_remaining: int = 0
    batch_chunk: int = 0
    # batch -> chunks handed out and not yet reported
    outstanding: Dict[int, int] = field(default_factory=dict)
    chunk_batch: Dict[int, int] = field(default_factory=dict)
    awf_records: List[List[Tuple[int, int, float, float]]] = field(default_factory=list)
    awf_weights: List[float] = field(default_factory=list)
    awf_cost_sums: List[float] = field(default_factory=list)
    af_mu: List[float] = field(default_factory=list)
    af_sigma: List[float] = field(default_factory=list)
    af_m2: List[float] = field(default_factory=list)
    af_samples: List[int] = field(default_factory=list)

    @property
    def remaining(self) -> int:
        return self.N - self.scheduled


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _ceil(x: float) -> int:
    # float noise must not push an exact integer to the next one
    return math.ceil(round(x, 9))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def normalize_weights(weights: Sequence[float]) -> List[float]:
    """Rescale weights so that they sum to their count"""
    total = math.fsum(weights)
    return [len(weights) * w / total for w in weights]


def fsc_chunk_size(R: int, P: int, h: float, sigma_time: float) -> int:
    if sigma_time <= 0 or P == 1:
        return _ceil_div(R, P)
    k = ((math.sqrt(2) * R * h) / (sigma_time * P * math.sqrt(math.log(P)))) ** (2.0 / 3.0)
    return max(1, _ceil(k))


def init_state(
        kind: TechniqueKind,
        N: int,
        P: int,
        stats: WorkloadStats,
        summary,
        scheduled: int = 0,
) -> SchedulerState:
    """
    Fresh scheduler state for the iterations [scheduled, N)

    Args:
        kind: Technique to run
        N: Total loop iterations
        P: Number of PEs
        stats: FLOP statistics of the workload
        summary: Object with ``weights``, ``reference_speed`` and ``h``
        scheduled: Iterations already claimed before this state takes over

    Returns:
        SchedulerState ready for ``next_chunk``
    """
    kind = TechniqueKind(kind)
    if N < 1 or P < 1:
        raise ConfigurationError(f"need N >= 1 and P >= 1, got N={N}, P={P}", field="N" if N < 1 else "P")
    if not 0 <= scheduled < N:
        raise ConfigurationError(f"scheduled offset {scheduled} outside [0, {N})", field="scheduled")
    weights = list(summary.weights)
    if len(weights) != P or any(w <= 0 for w in weights):
        raise ConfigurationError("need one positive weight per PE", field="weights")
    if summary.reference_speed <= 0:
        raise ConfigurationError("reference speed must be positive", field="reference_speed")
    if kind == TechniqueKind.FSC and summary.h <= 0:
        raise ConfigurationError("FSC needs a positive scheduling overhead h", field="h")

    R0 = N - scheduled
    state = SchedulerState(
        kind=kind,
        N=N,
        scheduled=scheduled,
        P=P,
        static_weights=normalize_weights(weights),
        h=summary.h,
        mu_time=stats.mu_flop / summary.reference_speed,
        sigma_time=stats.sigma_flop / summary.reference_speed,
        static_chunk=_ceil_div(R0, P),
        awf_records=[[] for _ in range(P)],
        awf_weights=[1.0] * P,
        awf_cost_sums=[0.0] * P,
        af_mu=[0.0] * P,
        af_sigma=[0.0] * P,
        af_m2=[0.0] * P,
        af_samples=[0] * P,
    )
    if kind == TechniqueKind.FSC:
        state.fsc_chunk = fsc_chunk_size(R0, P, state.h, state.sigma_time)
    return state


def _check_pe(s: SchedulerState, pe: int) -> None:
    if not 0 <= pe < s.P:
        raise IndexError(f"PE {pe} out of range for {s.P} PEs")


def _factoring_size(s: SchedulerState, pe: int, weight: Optional[float]) -> int:
    if s.batch_remaining == 0:
        batch = _ceil_div(s.remaining, 2)
        s.batch_index += 1
        s.batch_chunk = _ceil_div(batch, s.P)
        s.batch_remaining = batch
    if weight is None:
        size = s.batch_chunk
    else:
        size = max(1, _round_half_up(weight * s.batch_chunk))
    size = min(size, s.batch_remaining)
    s.batch_remaining -= size
    s.outstanding[s.batch_index] = s.outstanding.get(s.batch_index, 0) + 1
    s.chunk_batch[pe] = s.batch_index
    return size


def _af_size(s: SchedulerState, pe: int) -> int:
    R = s.remaining
    if s.af_samples[pe] == 0:
        return _ceil_div(R, 2 * s.P)
    sampled = [j for j in range(s.P) if s.af_samples[j] > 0]
    D = math.fsum(s.af_sigma[j] ** 2 / s.af_mu[j] for j in sampled)
    T = R / math.fsum(1.0 / s.af_mu[j] for j in sampled)
    x = (D + 2 * T - math.sqrt(D * D + 4 * D * T)) / (2 * s.af_mu[pe])
    return _ceil(x)


def next_chunk(s: SchedulerState, pe: int, now: float = 0.0) -> Optional[Tuple[int, int]]:
    """
    Claim the next chunk for ``pe``

    Returns:
        (start index, size), or None when there is no work for this PE
    """
    _check_pe(s, pe)
    R = s.remaining
    if R <= 0:
        return None

    kind = s.kind
    if kind == TechniqueKind.STATIC:
        if pe in s.static_served:
            return None
        s.static_served.add(pe)
        size = s.static_chunk
    elif kind == TechniqueKind.SS:
        size = 1
    elif kind == TechniqueKind.FSC:
        size = s.fsc_chunk
    elif kind == TechniqueKind.GSS:
        size = _ceil_div(R, s.P)
    elif kind == TechniqueKind.FAC:
        size = _factoring_size(s, pe, None)
    elif kind == TechniqueKind.WF:
        size = _factoring_size(s, pe, s.static_weights[pe])
    elif kind in ADAPTIVE_WEIGHTED:
        size = _factoring_size(s, pe, s.awf_weights[pe])
    else:
        size = _af_size(s, pe)

    size = min(max(size, 1), R)
    start = s.scheduled
    s.scheduled += size
    return start, size


def _recompute_awf_weights(s: SchedulerState) -> None:
    inverse = []
    for records, cost_sum in zip(s.awf_records, s.awf_cost_sums):
        if records:
            count = len(records)
            inverse.append(count * (count + 1) / 2 / cost_sum)
        else:
            inverse.append(None)
    known = [v for v in inverse if v is not None]
    if not known:
        return
    fill = math.fsum(known) / len(known)
    inverse = [fill if v is None else v for v in inverse]
    total = math.fsum(inverse)
    s.awf_weights = [s.P * v / total for v in inverse]


def _append_awf_record(s: SchedulerState, fb: Feedback) -> None:
    t = fb.total_time if s.kind in TOTAL_TIME_BASED else fb.exec_time
    records = s.awf_records[fb.pe]
    step = len(records) + 1
    records.append((step, fb.chunk_size, t, fb.total_time))
    s.awf_cost_sums[fb.pe] += step * t / fb.chunk_size


def _update_af(s: SchedulerState, fb: Feedback) -> None:
    x = fb.exec_time / fb.chunk_size
    pe = fb.pe
    s.af_samples[pe] += 1
    delta = x - s.af_mu[pe]
    s.af_mu[pe] += delta / s.af_samples[pe]
    s.af_m2[pe] += delta * (x - s.af_mu[pe])
    s.af_sigma[pe] = math.sqrt(max(s.af_m2[pe], 0.0) / s.af_samples[pe])


def record_feedback(s: SchedulerState, fb: Feedback) -> SchedulerState:
    """Report a finished chunk; adaptive techniques update their model"""
    _check_pe(s, fb.pe)
    batch = s.chunk_batch.pop(fb.pe, None)
    if batch is not None:
        s.outstanding[batch] -= 1

    if s.kind in ADAPTIVE_WEIGHTED:
        _append_awf_record(s, fb)
        if s.kind not in BATCH_UPDATED:
            _recompute_awf_weights(s)
        elif batch is not None and s.outstanding[batch] == 0:
            fully_assigned = batch < s.batch_index or s.batch_remaining == 0
            if fully_assigned:
                del s.outstanding[batch]
                _recompute_awf_weights(s)
    elif s.kind == TechniqueKind.AF:
        _update_af(s, fb)
    return s


def seed_state(s: SchedulerState, history: Iterable[Feedback]) -> SchedulerState:
    """Replay measured chunks into an adaptive state before it schedules anything"""
    if s.kind in ADAPTIVE_WEIGHTED:
        replayed = False
        for fb in history:
            _append_awf_record(s, fb)
            replayed = True
        if replayed:
            _recompute_awf_weights(s)
    elif s.kind == TechniqueKind.AF:
        for fb in history:
            _update_af(s, fb)
    return s

"""
Heterogeneous machine model and perturbation traces
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple, Union

from .errors import ConfigurationError, TraceError
from .rng import stream

DEFAULT_S0 = 1e9
DEFAULT_LATENCY = 8e-8
DEFAULT_BANDWIDTH = 1e11
DEFAULT_MSG_BITS = 256

PERTURBATION_PERIOD = 100.0
PERTURBATION_WINDOW = 50.0
AVAILABILITY_PHASE = 50.0

AVAILABILITY_FACTORS = {"m": 0.75, "s": 0.25}
NETWORK_FACTORS = {"m": 1e-5, "s": 1e-7}


class CoreClass(str, Enum):
    BROADWELL = "broadwell"
    KNL = "knl"
    CUSTOM = "custom"


CLASS_WEIGHTS = {CoreClass.BROADWELL: 1.398, CoreClass.KNL: 0.316}

# preset -> (broadwell cores, knl cores)
PRESETS = {"p224": (112, 112), "p696": (440, 256)}


@dataclass(frozen=True)
class CoreSpec:
    id: int
    klass: CoreClass
    weight: float
    speed: float


@dataclass(frozen=True)
class NetworkSpec:
    latency0: float = DEFAULT_LATENCY
    bandwidth0: float = DEFAULT_BANDWIDTH
    msg_bits: float = DEFAULT_MSG_BITS
    # "divide": latency grows as the factor shrinks; "multiply": it shrinks with it
    latency_mode: str = "divide"

    def __post_init__(self):
        if self.latency0 < 0:
            raise ConfigurationError("latency0 must be non-negative", field="latency0")
        if self.bandwidth0 <= 0:
            raise ConfigurationError("bandwidth0 must be positive", field="bandwidth0")
        if self.msg_bits < 0:
            raise ConfigurationError("msg_bits must be non-negative", field="msg_bits")
        if self.latency_mode not in ("divide", "multiply"):
            raise ConfigurationError(
                f"latency_mode must be 'divide' or 'multiply', got '{self.latency_mode}'",
                field="latency_mode",
            )

    @classmethod
    def zero(cls) -> "NetworkSpec":
        """Network whose messages take no time"""
        return cls(latency0=0.0, bandwidth0=DEFAULT_BANDWIDTH, msg_bits=0)


class TraceKind(str, Enum):
    AVAILABILITY = "availability"
    BANDWIDTH = "bandwidth"
    LATENCY = "latency-factor"


@dataclass(frozen=True)
class Trace:
    """
    Right-continuous piecewise-constant multiplicative factor.

    ``points`` holds (t, factor) pairs starting at t = 0. With a period the
    points describe one cycle [0, period) that repeats forever; without one
    the last factor holds up to ``horizon`` (forever when it is None).

    ``phase`` is where the first perturbed window starts. It is metadata for
    trace files and reports; evaluation reads ``points`` only, so the factor
    before ``phase`` must be 1.
    """

    kind: TraceKind
    points: Tuple[Tuple[float, float], ...]
    period: Optional[float] = None
    phase: float = 0.0
    horizon: Optional[float] = None

    def __post_init__(self):
        points = tuple((float(t), float(f)) for t, f in self.points)
        object.__setattr__(self, "points", points)
        if not points:
            raise ConfigurationError("trace needs at least one point", field="points")
        if points[0][0] != 0.0:
            raise TraceError(f"trace must start at t=0, starts at {points[0][0]}", field="points")
        for (t0, _), (t1, _) in zip(points, points[1:]):
            if t1 <= t0:
                raise ConfigurationError(f"trace times must increase strictly ({t0} then {t1})", field="points")
        for _, f in points:
            if not 0.0 < f <= 1.0:
                raise ConfigurationError(f"trace factor {f} is outside (0, 1]", field="points")
        if self.period is not None:
            if self.period <= 0:
                raise ConfigurationError("trace period must be positive", field="period")
            if points[-1][0] >= self.period:
                raise ConfigurationError("periodic trace points must lie inside one period", field="period")
            if self.horizon is not None:
                raise ConfigurationError("a periodic trace covers all times and takes no horizon", field="horizon")
        if self.horizon is not None and self.horizon <= points[-1][0]:
            raise ConfigurationError(
                f"trace horizon {self.horizon} does not cover its last point at {points[-1][0]}", field="horizon"
            )
        if self.phase < 0 or (self.period is not None and self.phase >= self.period):
            raise TraceError(f"trace phase {self.phase} lies outside its cycle", field="phase")
        if any(f != 1.0 for t, f in points if t < self.phase):
            raise TraceError(f"trace is perturbed before its phase {self.phase}", field="phase")
        object.__setattr__(self, "_times", tuple(t for t, _ in points))
        object.__setattr__(self, "_factors", tuple(f for _, f in points))

    @classmethod
    def constant(cls, kind: TraceKind, factor: float = 1.0) -> "Trace":
        return cls(kind=kind, points=((0.0, factor),))

    @property
    def is_constant(self) -> bool:
        return self.horizon is None and len(set(self._factors)) == 1

    def _check_covered(self, t: float) -> None:
        if t < 0:
            raise TraceError(f"{self.kind.value} trace is undefined at t={t}", field="t")
        if self.horizon is not None and t >= self.horizon:
            raise TraceError(
                f"{self.kind.value} trace was drawn up to t={self.horizon}, t={t} is past it", field="t"
            )

    def value_at(self, t: float) -> float:
        self._check_covered(t)
        if self.is_constant:
            return self._factors[0]
        if self.period is not None:
            t = t - math.floor(t / self.period) * self.period
            if t >= self.period:
                t -= self.period
        return self._factors[bisect_right(self._times, t) - 1]

    def segments(self, t: float) -> Iterator[Tuple[float, float, float]]:
        """
        Yield consecutive (start, end, factor) pieces from t onwards

        Raises:
            TraceError: when a piece past the trace horizon is needed
        """
        self._check_covered(t)
        times, factors = self._times, self._factors
        if self.is_constant:
            yield t, math.inf, factors[0]
            return

        if self.period is None:
            limit = math.inf if self.horizon is None else self.horizon
            i = bisect_right(times, t) - 1
            start = t
            while True:
                end = times[i + 1] if i + 1 < len(times) else limit
                yield start, end, factors[i]
                if end == math.inf:
                    return
                if end == limit:
                    self._check_covered(end)
                start = end
                i += 1

        period = self.period
        cycle = math.floor(t / period)
        offset = t - cycle * period
        if offset >= period:
            cycle += 1
            offset -= period
        i = bisect_right(times, max(offset, 0.0)) - 1
        start = t
        while True:
            if i + 1 < len(times):
                end = cycle * period + times[i + 1]
            else:
                end = (cycle + 1) * period
            if end > start:
                yield start, end, factors[i]
                start = end
            i += 1
            if i == len(times):
                i = 0
                cycle += 1


class Scenario(str, Enum):
    NP = "np"
    PEA_CM = "pea-cm"
    PEA_CS = "pea-cs"
    PEA_EM = "pea-em"
    PEA_ES = "pea-es"
    BW_CM = "bw-cm"
    BW_CS = "bw-cs"
    BW_EM = "bw-em"
    BW_ES = "bw-es"
    LAT_CM = "lat-cm"
    LAT_CS = "lat-cs"
    LAT_EM = "lat-em"
    LAT_ES = "lat-es"
    ALL_CM = "all-cm"
    ALL_CS = "all-cs"
    ALL_EM = "all-em"
    ALL_ES = "all-es"

    @property
    def category(self) -> str:
        return self.value.split("-")[0]

    @property
    def exponential(self) -> bool:
        return self.value.endswith(("em", "es"))

    @property
    def intensity(self) -> str:
        return self.value[-1]


@dataclass(frozen=True)
class PerturbationSpec:
    scenario: Scenario
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "scenario", Scenario(self.scenario))
        except ValueError:
            raise ConfigurationError(f"unknown perturbation scenario '{self.scenario}'", field="scenario")


@dataclass(frozen=True)
class PlatformModel:
    cores: Tuple[CoreSpec, ...]
    network: NetworkSpec
    avail_traces: Tuple[Trace, ...]
    bw_trace: Trace
    lat_trace: Trace

    def __post_init__(self):
        if not self.cores:
            raise ConfigurationError("platform has no cores", field="cores")
        if len(self.avail_traces) != len(self.cores):
            raise ConfigurationError(
                f"{len(self.cores)} cores but {len(self.avail_traces)} availability traces",
                field="avail_traces",
            )

    @property
    def size(self) -> int:
        return len(self.cores)

    def with_traces(self, avail: Sequence[Trace], bw: Trace, lat: Trace) -> "PlatformModel":
        return replace(self, avail_traces=tuple(avail), bw_trace=bw, lat_trace=lat)


@dataclass(frozen=True)
class PlatformSummary:
    """What the scheduling techniques know about the machine"""

    weights: Tuple[float, ...]
    reference_speed: float
    h: float


def _unperturbed(n_cores: int) -> Tuple[Tuple[Trace, ...], Trace, Trace]:
    avail = Trace.constant(TraceKind.AVAILABILITY)
    return (
        (avail,) * n_cores,
        Trace.constant(TraceKind.BANDWIDTH),
        Trace.constant(TraceKind.LATENCY),
    )


def scaled_counts(preset: str, total: int) -> Tuple[int, int]:
    """Broadwell/KNL split of ``total`` cores in the proportion of ``preset``"""
    broadwell, knl = PRESETS[preset]
    if total < 1:
        raise ConfigurationError("a scaled platform needs at least one core", field="scale_to")
    if total == 1:
        return 1, 0
    fast = int(math.floor(total * broadwell / (broadwell + knl) + 0.5))
    fast = min(max(fast, 1), total - 1)
    return fast, total - fast


def build_platform(
        preset: Union[str, Sequence[float], None] = "p696",
        S0: float = DEFAULT_S0,
        network: Optional[NetworkSpec] = None,
        scale_to: Optional[int] = None,
) -> PlatformModel:
    """
    Build an unperturbed platform

    Args:
        preset: "p224", "p696" or an explicit list of relative core weights
        S0: Nominal speed of one unit of weight in FLOP/s
        network: Network parameters, defaults to NetworkSpec()
        scale_to: Keep the preset's class proportion at this many cores

    Returns:
        PlatformModel with constant traces (factor 1)
    """
    if S0 <= 0:
        raise ConfigurationError(f"S0 must be positive, got {S0}", field="S0")

    if isinstance(preset, str):
        if preset not in PRESETS:
            raise ConfigurationError(
                f"unknown platform preset '{preset}' (expected {', '.join(PRESETS)})", field="platform"
            )
        counts = scaled_counts(preset, scale_to) if scale_to is not None else PRESETS[preset]
        classes = [CoreClass.BROADWELL] * counts[0] + [CoreClass.KNL] * counts[1]
        weights = [CLASS_WEIGHTS[klass] for klass in classes]
    else:
        weights = [float(w) for w in (preset or [])]
        classes = [CoreClass.CUSTOM] * len(weights)
        if not weights:
            raise ConfigurationError("custom platform needs at least one core", field="cores")
        if any(w <= 0 for w in weights):
            raise ConfigurationError("core weights must be positive", field="cores")

    cores = tuple(
        CoreSpec(id=i, klass=klass, weight=weight, speed=weight * S0)
        for i, (klass, weight) in enumerate(zip(classes, weights))
    )
    avail, bw, lat = _unperturbed(len(cores))
    return PlatformModel(
        cores=cores,
        network=network or NetworkSpec(),
        avail_traces=avail,
        bw_trace=bw,
        lat_trace=lat,
    )


def _window_trace(kind: TraceKind, factor: float, offset: float) -> Trace:
    if offset == 0.0:
        points = ((0.0, factor), (PERTURBATION_WINDOW, 1.0))
    else:
        points = ((0.0, 1.0), (offset, factor))
    return Trace(kind=kind, points=points, period=PERTURBATION_PERIOD, phase=offset)


def _exponential_trace(kind: TraceKind, mean: float, offset: float, horizon: float, seed: int, purpose: str) -> Trace:
    """
    One factor per perturbed window, drawn from an exponential with ``mean``, clamped to (0, 1]

    The trace ends where the first undrawn window would start, at or after ``horizon``.
    """
    rng = stream(seed, purpose)
    points = [] if offset == 0.0 else [(0.0, 1.0)]
    start = offset
    while start < horizon:
        factor = 0.0
        while factor <= 0.0:
            factor = float(rng.exponential(mean))
        points.append((start, min(factor, 1.0)))
        points.append((start + PERTURBATION_WINDOW, 1.0))
        start += PERTURBATION_PERIOD
    if not points:
        points = [(0.0, 1.0)]
    return Trace(kind=kind, points=tuple(points), phase=offset, horizon=start)


def generate_traces(
        spec: PerturbationSpec,
        horizon: float,
        n_cores: int = 1,
) -> Tuple[Tuple[Trace, ...], Trace, Trace]:
    """
    Generate the availability, bandwidth and latency-factor traces of a scenario

    Args:
        spec: Scenario code and seed for the exponential variants
        horizon: Seconds to cover with drawn windows (periodic traces cover all t)
        n_cores: Number of availability traces to return; all cores share one

    Returns:
        (availability trace per core, bandwidth trace, latency-factor trace)
    """
    if horizon <= 0:
        raise ConfigurationError(f"horizon must be positive, got {horizon}", field="horizon")
    spec = PerturbationSpec(spec.scenario, spec.seed)
    avail, bw, lat = _unperturbed(n_cores)
    scenario = spec.scenario
    if scenario == Scenario.NP:
        return avail, bw, lat

    category = scenario.category

    def make(kind: TraceKind, factors: dict, offset: float, purpose: str) -> Trace:
        level = factors[scenario.intensity]
        if scenario.exponential:
            return _exponential_trace(kind, level, offset, horizon, spec.seed, purpose)
        return _window_trace(kind, level, offset)

    if category in ("pea", "all"):
        shared = make(TraceKind.AVAILABILITY, AVAILABILITY_FACTORS, AVAILABILITY_PHASE, "availability")
        avail = (shared,) * n_cores
    if category in ("bw", "all"):
        bw = make(TraceKind.BANDWIDTH, NETWORK_FACTORS, 0.0, "bandwidth")
    if category in ("lat", "all"):
        lat = make(TraceKind.LATENCY, NETWORK_FACTORS, 0.0, "latency")
    return avail, bw, lat


def perturb(p: PlatformModel, spec: PerturbationSpec, horizon: float) -> PlatformModel:
    """Attach the traces of ``spec`` to a platform"""
    avail, bw, lat = generate_traces(spec, horizon, n_cores=p.size)
    return p.with_traces(avail, bw, lat)


def _check_core(p: PlatformModel, core: int) -> None:
    if not 0 <= core < p.size:
        raise IndexError(f"core {core} out of range for a platform of {p.size} cores")


def effective_speed(p: PlatformModel, core: int, t: float) -> float:
    """Delivered FLOP/s of ``core`` at time t"""
    _check_core(p, core)
    return p.cores[core].speed * p.avail_traces[core].value_at(t)


def one_way_time(network: NetworkSpec, bw_factor: float, lat_factor: float) -> float:
    if network.latency_mode == "divide":
        latency = network.latency0 / lat_factor
    else:
        latency = network.latency0 * lat_factor
    return latency + network.msg_bits / (network.bandwidth0 * bw_factor)


def transfer_time(p: PlatformModel, t: float) -> float:
    """One-way time of a scheduling message sent at t"""
    return one_way_time(p.network, p.bw_trace.value_at(t), p.lat_trace.value_at(t))


def summarize_platform(p: PlatformModel, claim_legs: int = 2) -> PlatformSummary:
    """Nominal weights, mean core speed and unperturbed claim overhead"""
    speeds = [core.speed for core in p.cores]
    return PlatformSummary(
        weights=tuple(core.weight for core in p.cores),
        reference_speed=math.fsum(speeds) / len(speeds),
        h=claim_legs * one_way_time(p.network, 1.0, 1.0),
    )


def save_trace(trace: Trace, path: Union[str, Path]) -> None:
    lines = []
    if trace.period is not None:
        lines.append(f"#period {trace.period!r} #phase {trace.phase!r}")
    elif trace.horizon is not None:
        lines.append(f"#horizon {trace.horizon!r} #phase {trace.phase!r}")
    elif trace.phase:
        lines.append(f"#phase {trace.phase!r}")
    lines.extend(f"{t!r} {f!r}" for t, f in trace.points)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trace(path: Union[str, Path], kind: TraceKind = TraceKind.AVAILABILITY) -> Trace:
    period, phase, horizon = None, 0.0, None
    points = []
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line.replace("#", " ").split()
            for key, value in zip(fields[::2], fields[1::2]):
                if key == "period":
                    period = float(value)
                elif key == "phase":
                    phase = float(value)
                elif key == "horizon":
                    horizon = float(value)
            continue
        try:
            t, f = (float(x) for x in line.split())
        except ValueError:
            raise ConfigurationError(f"'{path}' line {number}: expected '<t> <factor>'", field="points")
        points.append((t, f))
    return Trace(kind=kind, points=tuple(points), period=period, phase=phase, horizon=horizon)

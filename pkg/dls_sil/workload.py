"""
Synthetic loop workloads: per-iteration FLOP costs and their statistics
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np

from .errors import ConfigurationError, EmptyWorkloadError
from .rng import stream

DEFAULT_ITERATIONS = 400_000


class DistributionKind(str, Enum):
    PSIA_SURROGATE = "psia-surrogate"
    CONSTANT = "constant"
    UNIFORM = "uniform"
    NORMAL = "normal"
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"


# parameter names each kind requires
REQUIRED_PARAMETERS = {
    DistributionKind.PSIA_SURROGATE: ("lo", "hi"),
    DistributionKind.CONSTANT: ("c",),
    DistributionKind.UNIFORM: ("lo", "hi"),
    DistributionKind.NORMAL: ("mu", "sigma", "lo", "hi"),
    DistributionKind.EXPONENTIAL: ("rate", "lo", "hi"),
    DistributionKind.GAMMA: ("k", "theta", "lo", "hi"),
}


@dataclass(frozen=True)
class DistributionSpec:
    """FLOP-per-iteration distribution with its parameters"""

    kind: DistributionKind
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        try:
            kind = DistributionKind(self.kind)
        except ValueError:
            raise ConfigurationError(f"unknown distribution kind '{self.kind}'", field="kind")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "parameters", dict(self.parameters))
        validate_spec(self)

    def mean(self) -> float:
        """Analytic mean of the untruncated distribution"""
        p = self.parameters
        if self.kind == DistributionKind.CONSTANT:
            return p["c"]
        if self.kind in (DistributionKind.UNIFORM, DistributionKind.PSIA_SURROGATE):
            return (p["lo"] + p["hi"]) / 2
        if self.kind == DistributionKind.NORMAL:
            return p["mu"]
        if self.kind == DistributionKind.EXPONENTIAL:
            return 1.0 / p["rate"]
        return p["k"] * p["theta"]


def validate_spec(spec: DistributionSpec) -> None:
    """
    Check a distribution spec against its invariants

    Raises:
        ConfigurationError naming the offending parameter
    """
    params = spec.parameters
    for name in REQUIRED_PARAMETERS[spec.kind]:
        if name not in params:
            raise ConfigurationError(f"{spec.kind.value}: missing parameter '{name}'", field=name)
        value = params[name]
        if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
            raise ConfigurationError(
                f"{spec.kind.value}: parameter '{name}' must be a positive number, got {value!r}",
                field=name,
            )
    if "lo" in params and "hi" in params:
        if params["lo"] >= params["hi"]:
            raise ConfigurationError(
                f"{spec.kind.value}: bounds are inverted (lo={params['lo']}, hi={params['hi']})",
                field="lo",
            )
        if spec.kind not in (DistributionKind.UNIFORM, DistributionKind.PSIA_SURROGATE):
            mean = spec.mean()
            if not params["lo"] <= mean <= params["hi"]:
                raise ConfigurationError(
                    f"{spec.kind.value}: bounds [{params['lo']}, {params['hi']}] exclude the mean {mean}",
                    field="hi",
                )


# Table 1 applications
APPLICATIONS: Dict[str, DistributionSpec] = {
    "psia": DistributionSpec(DistributionKind.PSIA_SURROGATE, {"lo": 5.9e7, "hi": 6.6e7}),
    "constant": DistributionSpec(DistributionKind.CONSTANT, {"c": 2.3e8}),
    "uniform": DistributionSpec(DistributionKind.UNIFORM, {"lo": 1e3, "hi": 7e8}),
    "normal": DistributionSpec(
        DistributionKind.NORMAL, {"mu": 9.5e8, "sigma": 7e7, "lo": 6e8, "hi": 1.3e9}
    ),
    "exponential": DistributionSpec(
        DistributionKind.EXPONENTIAL, {"rate": 1 / 3e8, "lo": 948.0, "hi": 4.5e9}
    ),
    "gamma": DistributionSpec(
        DistributionKind.GAMMA, {"k": 2.0, "theta": 1e8, "lo": 4.1e6, "hi": 2.7e9}
    ),
}


def application(name: str) -> DistributionSpec:
    """Look up a named application profile"""
    try:
        return APPLICATIONS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown application '{name}' (expected one of {', '.join(APPLICATIONS)})",
            field="app",
        )


@dataclass(frozen=True)
class Workload:
    n: int
    flops: np.ndarray
    seed: int
    spec: Optional[DistributionSpec] = None

    def __post_init__(self):
        if len(self.flops) != self.n:
            raise ConfigurationError(
                f"workload declares n={self.n} but carries {len(self.flops)} values", field="n"
            )

    @property
    def has_stats(self) -> bool:
        return self.n > 0


@dataclass(frozen=True)
class WorkloadStats:
    mu_flop: float
    sigma_flop: float


def _draw_bounded(draw: Callable[[int], np.ndarray], lo: float, hi: float, n: int) -> np.ndarray:
    """Fill n values from ``draw``, rejecting those outside [lo, hi]"""
    out = np.empty(n, dtype=np.float64)
    filled = 0
    while filled < n:
        batch = draw(max(n - filled, 64))
        accepted = batch[(batch >= lo) & (batch <= hi)]
        take = min(len(accepted), n - filled)
        out[filled:filled + take] = accepted[:take]
        filled += take
    return out


def generate_workload(spec: DistributionSpec, n: int, seed: int) -> Workload:
    """
    Draw the per-iteration FLOP costs of a loop

    Args:
        spec: Distribution of the FLOP count of one iteration
        n: Number of loop iterations
        seed: Experiment seed; the workload uses its own stream

    Returns:
        Workload whose values are a pure function of (spec, n, seed)
    """
    if n < 0:
        raise ConfigurationError(f"iteration count must be non-negative, got {n}", field="n")
    validate_spec(spec)
    rng = stream(seed, "workload")
    p = spec.parameters

    if n == 0:
        flops = np.empty(0, dtype=np.float64)
    elif spec.kind == DistributionKind.CONSTANT:
        flops = np.full(n, float(p["c"]))
    elif spec.kind in (DistributionKind.UNIFORM, DistributionKind.PSIA_SURROGATE):
        flops = rng.uniform(p["lo"], p["hi"], size=n)
    elif spec.kind == DistributionKind.NORMAL:
        flops = _draw_bounded(lambda k: rng.normal(p["mu"], p["sigma"], size=k), p["lo"], p["hi"], n)
    elif spec.kind == DistributionKind.EXPONENTIAL:
        flops = _draw_bounded(lambda k: rng.exponential(1.0 / p["rate"], size=k), p["lo"], p["hi"], n)
    else:
        flops = _draw_bounded(lambda k: rng.gamma(p["k"], p["theta"], size=k), p["lo"], p["hi"], n)

    flops.setflags(write=False)
    return Workload(n=n, flops=flops, seed=seed, spec=spec)


def workload_stats(w: Workload) -> WorkloadStats:
    """
    Mean and population standard deviation of the FLOP per iteration

    Raises:
        EmptyWorkloadError: when the workload has no iterations
    """
    if w.n == 0:
        raise EmptyWorkloadError("cannot compute statistics of an empty workload")
    values = w.flops
    if values.min() == values.max():
        return WorkloadStats(mu_flop=float(values[0]), sigma_flop=0.0)
    mu = math.fsum(values) / w.n
    sigma = math.sqrt(math.fsum((values - mu) ** 2) / w.n)
    return WorkloadStats(mu_flop=mu, sigma_flop=sigma)


def save_workload(w: Workload, path: Union[str, Path]) -> None:
    """Write the workload text format: header, then one FLOP value per line"""
    lines = [f"n {w.n} seed {w.seed}"]
    lines.extend(repr(float(value)) for value in w.flops)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_workload(path: Union[str, Path]) -> Workload:
    """Read a workload written by ``save_workload``"""
    lines = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise ConfigurationError(f"'{path}' is empty", field="header")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "n" or header[2] != "seed":
        raise ConfigurationError(f"'{path}': malformed header '{lines[0]}'", field="header")
    n, seed = int(header[1]), int(header[3])
    try:
        flops = np.array([float(line) for line in lines[1:]], dtype=np.float64)
    except ValueError as e:
        raise ConfigurationError(f"'{path}': {e}", field="flops")
    if len(flops) != n:
        raise ConfigurationError(f"'{path}': header says {n} values, found {len(flops)}", field="n")
    if n and flops.min() <= 0:
        raise ConfigurationError(f"'{path}': FLOP values must be positive", field="flops")
    flops.setflags(write=False)
    return Workload(n=n, flops=flops, seed=seed)

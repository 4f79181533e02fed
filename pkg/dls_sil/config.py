"""
JSON configuration documents: experiment plans and platform descriptions
"""

import json
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError
from .platform import (
    CLASS_WEIGHTS,
    DEFAULT_BANDWIDTH,
    DEFAULT_LATENCY,
    DEFAULT_MSG_BITS,
    DEFAULT_S0,
    PRESETS,
    CoreClass,
    NetworkSpec,
    PlatformModel,
    Scenario,
    build_platform,
)
from .sched import TechniqueKind
from .sil import DEFAULT_SIL_PERIOD
from .workload import APPLICATIONS, DEFAULT_ITERATIONS, DistributionKind, DistributionSpec

SIL = "SIL"


class DistributionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: DistributionKind
    parameters: Dict[str, float]

    def to_spec(self) -> DistributionSpec:
        return DistributionSpec(self.kind, self.parameters)


class PlatformConfig(BaseModel):
    """
    Platform description: either class counts or an explicit weight list
    """

    model_config = ConfigDict(extra="forbid")

    broadwell: int = Field(0, ge=0)
    knl: int = Field(0, ge=0)
    weights: Dict[CoreClass, float] = Field(default_factory=dict)
    cores: Optional[List[float]] = None
    S0: float = Field(DEFAULT_S0, gt=0)
    latency0: float = Field(DEFAULT_LATENCY, ge=0)
    bandwidth0: float = Field(DEFAULT_BANDWIDTH, gt=0)
    msg_bits: float = Field(DEFAULT_MSG_BITS, ge=0)
    latency_mode: Literal["divide", "multiply"] = "divide"

    @model_validator(mode="after")
    def _check_cores(self):
        if self.cores is not None:
            if self.broadwell or self.knl:
                raise ValueError("give either 'cores' or class counts, not both")
            if not self.cores or any(w <= 0 for w in self.cores):
                raise ValueError("'cores' must list positive weights")
        elif self.broadwell + self.knl == 0:
            raise ValueError("platform has no cores")
        return self

    def to_platform(self) -> PlatformModel:
        network = NetworkSpec(
            latency0=self.latency0,
            bandwidth0=self.bandwidth0,
            msg_bits=self.msg_bits,
            latency_mode=self.latency_mode,
        )
        if self.cores is not None:
            return build_platform(self.cores, S0=self.S0, network=network)

        class_weights = {**CLASS_WEIGHTS, **self.weights}
        classes = [CoreClass.BROADWELL] * self.broadwell + [CoreClass.KNL] * self.knl
        p = build_platform([class_weights[klass] for klass in classes], S0=self.S0, network=network)
        cores = tuple(replace(core, klass=klass) for core, klass in zip(p.cores, classes))
        return PlatformModel(cores, p.network, p.avail_traces, p.bw_trace, p.lat_trace)


class PlanConfig(BaseModel):
    """One factorial experiment; every list is one factor of the product"""

    model_config = ConfigDict(extra="forbid")

    apps: List[Union[str, DistributionConfig]] = Field(min_length=1)
    techniques: List[str] = Field(min_length=1)
    scenarios: List[Scenario] = Field(min_length=1)
    platforms: List[str] = Field(default_factory=lambda: ["p696"], min_length=1)
    n: int = Field(DEFAULT_ITERATIONS, ge=1)
    repetitions: int = Field(1, ge=1)
    base_seed: int = Field(0, ge=0, lt=2 ** 64)
    scale_to: Optional[int] = Field(None, ge=1)
    sil_period: float = Field(DEFAULT_SIL_PERIOD, gt=0)
    sil_candidates: Optional[List[TechniqueKind]] = None
    output_dir: str = "results"
    workers: int = Field(1, ge=1)
    chunk_logs: bool = True
    charts: bool = True

    @field_validator("apps")
    @classmethod
    def _known_apps(cls, apps):
        for app in apps:
            if isinstance(app, str) and app not in APPLICATIONS:
                raise ValueError(f"unknown application '{app}'")
        return apps

    @field_validator("techniques")
    @classmethod
    def _known_techniques(cls, techniques):
        normalized = []
        for name in techniques:
            name = name.strip().upper()
            if name != SIL:
                TechniqueKind(name)
            normalized.append(name)
        if len(set(normalized)) != len(normalized):
            raise ValueError("techniques must be distinct")
        return normalized

    @field_validator("platforms")
    @classmethod
    def _known_platforms(cls, platforms):
        for name in platforms:
            if name not in PRESETS and not name.endswith(".json"):
                raise ValueError(f"platform '{name}' is neither a preset ({', '.join(PRESETS)}) nor a .json file")
        return platforms


def _raise_configuration_error(source: Union[str, Path], error: ValidationError):
    first = error.errors()[0]
    field = ".".join(str(part) for part in first["loc"]) or None
    raise ConfigurationError(f"{source}: {field}: {first['msg']}", field=field)


def _read_json(path: Union[str, Path]) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"cannot read '{path}': {e}", field="path")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"'{path}' is not valid JSON: {e}", field="path")


def parse_plan(document: dict, source: str = "plan") -> PlanConfig:
    try:
        return PlanConfig.model_validate(document)
    except ValidationError as e:
        _raise_configuration_error(source, e)


def load_plan(path: Union[str, Path]) -> PlanConfig:
    return parse_plan(_read_json(path), str(path))


def load_platform_config(path: Union[str, Path]) -> PlatformModel:
    try:
        config = PlatformConfig.model_validate(_read_json(path))
    except ValidationError as e:
        _raise_configuration_error(path, e)
    return config.to_platform()

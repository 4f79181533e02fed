"""
dls-sil - simulator of dynamic loop scheduling on perturbed heterogeneous machines
"""

__version__ = "1.0.0"
__author__ = "dls-sil developers"
__description__ = "Dynamic loop scheduling simulator with simulation-in-the-loop technique selection"

from .errors import ConfigurationError, DlsSilError, EmptyWorkloadError, TraceError
from .workload import (
    APPLICATIONS,
    DistributionKind,
    DistributionSpec,
    Workload,
    application,
    generate_workload,
    workload_stats,
)
from .platform import (
    NetworkSpec,
    PerturbationSpec,
    PlatformModel,
    Scenario,
    Trace,
    build_platform,
    effective_speed,
    generate_traces,
    perturb,
    summarize_platform,
    transfer_time,
)
from .sched import Feedback, SchedulerState, TechniqueKind, init_state, next_chunk, record_feedback
from .simengine import SimConfig, SimResult, integrate_flops, simulate
from .sil import MonitorSnapshot, SiLConfig, run_with_sil, select_technique, take_snapshot
from .harness import ExperimentPlan, ResultRow, run_plan, summarize

"""
Factorial experiment runner: one simulation per (app, technique, scenario,
platform, seed) cell, aggregated into CSV files and charts.
"""

import csv
import statistics
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .config import SIL, PlanConfig, load_platform_config
from .errors import ConfigurationError
from .logging_config import get_logger
from .platform import PerturbationSpec, PlatformModel, Scenario, build_platform, perturb
from .sched import TechniqueKind
from .sil import DEFAULT_SIL_PERIOD, SiLConfig, write_selection_log
from .simengine import SimConfig, simulate, write_chunk_log
from .workload import DEFAULT_ITERATIONS, DistributionSpec, application, generate_workload

logger = get_logger(__name__)

HORIZON = 100_000.0

RESULTS_HEADER = [
    "app", "technique", "scenario", "platform", "seed",
    "makespan_s", "total_overhead_s", "chunk_count", "sil_switch_count",
]
FAILURES_HEADER = ["app", "technique", "scenario", "platform", "seed", "error"]
TIMELINES_HEADER = ["app", "technique", "scenario", "platform", "seed", "selection_timeline"]
SUMMARY_HEADER = [
    "app", "scenario", "platform", "best_technique", "best_makespan_s",
    "sil_makespan_s", "sil_rank", "sil_ratio", "band_min_s", "band_max_s", "sil_in_band",
]


@dataclass(frozen=True)
class ExperimentPlan:
    apps: Tuple[Tuple[str, DistributionSpec], ...]
    techniques: Tuple[str, ...]
    scenarios: Tuple[Scenario, ...]
    platforms: Tuple[str, ...] = ("p696",)
    n: int = DEFAULT_ITERATIONS
    repetitions: int = 1
    base_seed: int = 0
    scale_to: Optional[int] = None
    sil_period: float = DEFAULT_SIL_PERIOD
    sil_candidates: Optional[Tuple[TechniqueKind, ...]] = None
    output_dir: Path = Path("results")
    workers: int = 1
    chunk_logs: bool = True
    charts: bool = True

    def __post_init__(self):
        if not (self.apps and self.techniques and self.scenarios and self.platforms):
            raise ConfigurationError("experiment plan has an empty factor", field="plan")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be at least 1", field="repetitions")
        if self.base_seed + self.repetitions > 2 ** 64:
            raise ConfigurationError("seed ladder runs past 2**64", field="base_seed")

    @classmethod
    def from_config(cls, config: PlanConfig, output_dir=None, workers=None) -> "ExperimentPlan":
        apps = []
        for app in config.apps:
            if isinstance(app, str):
                apps.append((app, application(app)))
            else:
                apps.append((app.name, app.to_spec()))
        return cls(
            apps=tuple(apps),
            techniques=tuple(config.techniques),
            scenarios=tuple(config.scenarios),
            platforms=tuple(config.platforms),
            n=config.n,
            repetitions=config.repetitions,
            base_seed=config.base_seed,
            scale_to=config.scale_to,
            sil_period=config.sil_period,
            sil_candidates=tuple(config.sil_candidates) if config.sil_candidates else None,
            output_dir=Path(output_dir or config.output_dir),
            workers=workers or config.workers,
            chunk_logs=config.chunk_logs,
            charts=config.charts,
        )

    @property
    def seeds(self) -> Tuple[int, ...]:
        return tuple(self.base_seed + k for k in range(self.repetitions))

    def cells(self) -> List["Cell"]:
        return [
            Cell(app, technique, scenario, platform, seed)
            for app, _ in self.apps
            for technique in self.techniques
            for scenario in self.scenarios
            for platform in self.platforms
            for seed in self.seeds
        ]

    def app_spec(self, name: str) -> DistributionSpec:
        return dict(self.apps)[name]


@dataclass(frozen=True, order=True)
class Cell:
    app: str
    technique: str
    scenario: Scenario
    platform: str
    seed: int

    @property
    def platform_label(self) -> str:
        return Path(self.platform).stem if self.platform.endswith(".json") else self.platform

    @property
    def name(self) -> str:
        return f"{self.app}_{self.technique}_{self.scenario.value}_{self.platform_label}_{self.seed}"


@dataclass(frozen=True)
class ResultRow:
    app: str
    technique: str
    scenario: str
    platform: str
    seed: int
    makespan_s: float
    total_overhead_s: float
    chunk_count: int
    sil_switch_count: int
    selection_timeline: str = ""

    def as_csv(self) -> List[str]:
        return [self.app, self.technique, self.scenario, self.platform, str(self.seed),
                repr(self.makespan_s), repr(self.total_overhead_s), str(self.chunk_count),
                str(self.sil_switch_count)]

    @property
    def key(self):
        return self.app, self.technique, self.scenario, self.platform, self.seed


@dataclass(frozen=True)
class CellFailure:
    cell: Cell
    error: str


@dataclass(frozen=True)
class SummaryRow:
    app: str
    scenario: str
    platform: str
    best_technique: str
    best_makespan_s: float
    sil_makespan_s: Optional[float]
    sil_rank: Optional[int]
    sil_ratio: Optional[float]
    band_min_s: float
    band_max_s: float
    sil_in_band: Optional[bool]


@dataclass
class PlanOutcome:
    rows: List[ResultRow] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)
    charts: List[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def cell_platform(plan: ExperimentPlan, cell: Cell) -> PlatformModel:
    if cell.platform.endswith(".json"):
        base = load_platform_config(cell.platform)
    else:
        base = build_platform(cell.platform, scale_to=plan.scale_to)
    return perturb(base, PerturbationSpec(cell.scenario, cell.seed), HORIZON)


def timeline_text(timeline) -> str:
    return ";".join(f"{t!r}:{kind.value}" for t, kind in timeline)


def run_cell(plan: ExperimentPlan, cell: Cell) -> ResultRow:
    """Simulate one cell and write its chunk and selection logs"""
    logger.debug("cell %s started", cell.name)
    workload = generate_workload(plan.app_spec(cell.app), plan.n, cell.seed)
    platform = cell_platform(plan, cell)
    if cell.technique == SIL:
        sil_cfg = SiLConfig(period=plan.sil_period, candidates=plan.sil_candidates or tuple(TechniqueKind))
        cfg = SimConfig(workload=workload, platform=platform, sil=sil_cfg, seed=cell.seed,
                        log_chunks=plan.chunk_logs)
    else:
        sil_cfg = None
        cfg = SimConfig(workload=workload, platform=platform, technique=TechniqueKind(cell.technique),
                        seed=cell.seed, log_chunks=plan.chunk_logs)
    result = simulate(cfg)

    if plan.chunk_logs:
        write_chunk_log(result.chunk_log, plan.output_dir / "chunks" / f"{cell.name}.csv")
    if sil_cfg is not None:
        write_selection_log(result.selections, sil_cfg.candidates,
                            plan.output_dir / "selections" / f"{cell.name}.csv")

    logger.debug("cell %s finished: makespan %.3f s", cell.name, result.makespan)
    return ResultRow(
        app=cell.app,
        technique=cell.technique,
        scenario=cell.scenario.value,
        platform=cell.platform_label,
        seed=cell.seed,
        makespan_s=result.makespan,
        total_overhead_s=result.total_overhead,
        chunk_count=result.chunk_count,
        sil_switch_count=result.switch_count if sil_cfg is not None else 0,
        selection_timeline=timeline_text(result.technique_timeline) if sil_cfg is not None else "",
    )


def _guarded(plan: ExperimentPlan, cell: Cell) -> Union[ResultRow, CellFailure]:
    try:
        return run_cell(plan, cell)
    except Exception as e:
        return CellFailure(cell, f"{type(e).__name__}: {e}")


def _prepare_output(plan: ExperimentPlan) -> None:
    try:
        plan.output_dir.mkdir(parents=True, exist_ok=True)
        if plan.chunk_logs:
            (plan.output_dir / "chunks").mkdir(exist_ok=True)
        if SIL in plan.techniques:
            (plan.output_dir / "selections").mkdir(exist_ok=True)
        marker = plan.output_dir / ".write-test"
        marker.write_text("", encoding="utf-8")
        marker.unlink()
    except OSError as e:
        raise ConfigurationError(f"output directory '{plan.output_dir}' is not writable: {e}", field="output_dir")


def run_plan(
        plan: ExperimentPlan,
        progress_callback: Optional[Callable[[int, int], None]] = None,
) -> PlanOutcome:
    """
    Execute every cell of the plan and write the result files

    Args:
        plan: The experiment to run
        progress_callback: Called with (finished cells, total cells)

    Returns:
        PlanOutcome with the sorted rows, the failed cells and chart paths
    """
    _prepare_output(plan)
    cells = plan.cells()
    total = len(cells)
    logger.info("running %d cells with %d worker(s)", total, plan.workers)

    outcomes = []
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(_guarded, plan, cell) for cell in cells]
            for done, future in enumerate(as_completed(futures), 1):
                outcomes.append(future.result())
                if progress_callback:
                    progress_callback(done, total)
    else:
        for done, cell in enumerate(cells, 1):
            outcomes.append(_guarded(plan, cell))
            if progress_callback:
                progress_callback(done, total)

    outcome = PlanOutcome()
    for item in outcomes:
        if isinstance(item, CellFailure):
            logger.error("cell %s failed: %s", item.cell.name, item.error)
            outcome.failures.append(item)
        else:
            outcome.rows.append(item)
    outcome.rows.sort(key=lambda row: row.key)
    outcome.failures.sort(key=lambda failure: failure.cell)

    write_results(outcome.rows, plan.output_dir / "results.csv")
    write_failures(outcome.failures, plan.output_dir / "failures.csv")
    if SIL in plan.techniques:
        write_timelines(outcome.rows, plan.output_dir / "timelines.csv")
    summary = summarize(outcome.rows)
    write_summary(summary, plan.output_dir / "summary.csv")
    if plan.charts and outcome.rows:
        from .charts import write_charts
        outcome.charts = write_charts(outcome.rows, summary, plan.output_dir / "charts")
    return outcome


def summarize(rows: Iterable[ResultRow]) -> List[SummaryRow]:
    """
    Per (app, scenario, platform): best single technique, the band spanned by
    the single techniques and where SiL lands relative to it

    Repetitions are averaged before ranking.
    """
    groups: Dict[Tuple[str, str, str], Dict[str, List[float]]] = {}
    for row in rows:
        per_technique = groups.setdefault((row.app, row.scenario, row.platform), {})
        per_technique.setdefault(row.technique, []).append(row.makespan_s)

    summary = []
    for (app, scenario, platform), per_technique in sorted(groups.items()):
        means = {name: statistics.fmean(values) for name, values in per_technique.items()}
        singles = {name: value for name, value in means.items() if name != SIL}
        if not singles:
            continue
        best = min(singles, key=lambda name: (singles[name], name))
        band_min, band_max = min(singles.values()), max(singles.values())
        sil = means.get(SIL)
        if sil is not None:
            rank = 1 + sum(1 for value in singles.values() if value < sil)
            ratio = sil / singles[best]
            in_band = band_min <= sil <= band_max
        else:
            rank = ratio = in_band = None
        summary.append(SummaryRow(
            app=app,
            scenario=scenario,
            platform=platform,
            best_technique=best,
            best_makespan_s=singles[best],
            sil_makespan_s=sil,
            sil_rank=rank,
            sil_ratio=ratio,
            band_min_s=band_min,
            band_max_s=band_max,
            sil_in_band=in_band,
        ))
    return summary


def _optional(value) -> str:
    return "" if value is None else repr(value)


def write_results(rows: Sequence[ResultRow], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        writer.writerows(row.as_csv() for row in rows)


def write_failures(failures: Sequence[CellFailure], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(FAILURES_HEADER)
        for failure in failures:
            cell = failure.cell
            writer.writerow([cell.app, cell.technique, cell.scenario.value, cell.platform_label, cell.seed,
                             failure.error])


def write_timelines(rows: Sequence[ResultRow], path: Path) -> None:
    """One line per SiL run: when each selection happened and what it picked"""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TIMELINES_HEADER)
        for row in rows:
            if row.technique == SIL:
                writer.writerow([row.app, row.technique, row.scenario, row.platform, row.seed,
                                 row.selection_timeline])


def write_summary(summary: Sequence[SummaryRow], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for s in summary:
            writer.writerow([
                s.app, s.scenario, s.platform, s.best_technique, repr(s.best_makespan_s),
                _optional(s.sil_makespan_s), "" if s.sil_rank is None else s.sil_rank,
                _optional(s.sil_ratio), repr(s.band_min_s), repr(s.band_max_s),
                "" if s.sil_in_band is None else int(s.sil_in_band),
            ])


def read_results(path: Union[str, Path]) -> List[ResultRow]:
    """Load a results.csv written by ``run_plan``"""
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != RESULTS_HEADER:
                raise ConfigurationError(f"'{path}' does not start with the results header", field="header")
            rows = []
            for record in reader:
                if not record:
                    continue
                app, technique, scenario, platform, seed, makespan, overhead, chunks, switches = record
                rows.append(ResultRow(app, technique, scenario, platform, int(seed), float(makespan),
                                      float(overhead), int(chunks), int(switches)))
            return rows
    except OSError as e:
        raise ConfigurationError(f"cannot read '{path}': {e}", field="path")
    except ValueError as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"'{path}': malformed row: {e}", field="row")


def format_summary(summary: Sequence[SummaryRow]) -> str:
    """Plain text table of a summary"""
    header = ("app", "scenario", "platform", "best", "best [s]", "SiL [s]", "rank", "ratio", "band [s]")
    lines = []
    for s in summary:
        lines.append((
            s.app, s.scenario, s.platform, s.best_technique, f"{s.best_makespan_s:.3f}",
            "-" if s.sil_makespan_s is None else f"{s.sil_makespan_s:.3f}",
            "-" if s.sil_rank is None else str(s.sil_rank),
            "-" if s.sil_ratio is None else f"{s.sil_ratio:.3f}",
            f"{s.band_min_s:.3f}..{s.band_max_s:.3f}" + ("" if s.sil_in_band in (None, True) else " !"),
        ))
    widths = [max(len(str(item)) for item in column) for column in zip(header, *lines)]
    out = ["  ".join(str(item).ljust(width) for item, width in zip(line, widths)).rstrip()
           for line in [header] + lines]
    return "\n".join(out)

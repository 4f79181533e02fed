#!/usr/bin/env python3
"""
CLI interface for the loop scheduling simulator
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .config import SIL, load_plan, load_platform_config
from .errors import DlsSilError
from .harness import (
    HORIZON,
    ExperimentPlan,
    ResultRow,
    format_summary,
    read_results,
    run_plan,
    summarize,
    timeline_text,
    write_results,
    write_timelines,
)
from .logging_config import setup_logging
from .platform import PRESETS, PerturbationSpec, Scenario, build_platform, perturb
from .sched import TechniqueKind, technique
from .sil import DEFAULT_SIL_PERIOD, MonitorMode, SiLConfig, write_selection_log
from .simengine import SimConfig, simulate, write_chunk_log
from .workload import APPLICATIONS, DEFAULT_ITERATIONS, application, generate_workload, load_workload


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        prog="dls-sil",
        description="Simulate dynamic loop scheduling with simulation-in-the-loop technique selection",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  dls-sil simulate --app psia --n 20000 --platform p224 --scale-to 9 --technique WF
  dls-sil simulate --app constant --platform p696 --technique SIL --scenario all-es
  dls-sil simulate --app workload.txt --platform platform.json --technique AWF-C --out run1
  dls-sil run-plan plan.json --workers 4
  dls-sil report results/results.csv
        """
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Log every SiL selection and simulation run"
    )
    parser.add_argument(
        "-q", "--quiet",
        action="store_true",
        help="Suppress progress output and informational logging"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="Run one simulation")
    sim.add_argument(
        "--app",
        default="psia",
        help=f"Application ({', '.join(APPLICATIONS)}) or a workload file (default: psia)"
    )
    sim.add_argument(
        "--n",
        type=int,
        default=DEFAULT_ITERATIONS,
        help=f"Loop iterations for a named application (default: {DEFAULT_ITERATIONS})"
    )
    sim.add_argument(
        "--platform",
        default="p696",
        help=f"Platform preset ({', '.join(PRESETS)}) or a platform JSON file (default: p696)"
    )
    sim.add_argument(
        "--scale-to",
        type=int,
        default=None,
        help="Shrink a preset to this many cores, keeping its core mix"
    )
    sim.add_argument(
        "--technique",
        default="SIL",
        help="Technique name or SIL (default: SIL)"
    )
    sim.add_argument(
        "--scenario",
        default="np",
        help="Perturbation scenario code (default: np)"
    )
    sim.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Experiment seed (default: 0)"
    )
    sim.add_argument(
        "--sil-period",
        type=float,
        default=DEFAULT_SIL_PERIOD,
        help=f"Seconds between SiL selections (default: {DEFAULT_SIL_PERIOD:g})"
    )
    sim.add_argument(
        "--candidates",
        default=None,
        help="Comma separated SiL candidates (default: all techniques)"
    )
    sim.add_argument(
        "--monitor",
        choices=[mode.value for mode in MonitorMode],
        default=MonitorMode.GROUND_TRUTH.value,
        help="How SiL observes the machine (default: ground-truth)"
    )
    sim.add_argument(
        "--out",
        default=None,
        help="Directory for results.csv, the chunk log and the selection log"
    )

    plan = commands.add_parser("run-plan", help="Run a factorial experiment plan")
    plan.add_argument(
        "plan",
        help="Experiment plan JSON file"
    )
    plan.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes (overrides the plan)"
    )
    plan.add_argument(
        "--out",
        default=None,
        help="Output directory (overrides the plan)"
    )

    report = commands.add_parser("report", help="Summarize a results.csv and draw its charts")
    report.add_argument(
        "results",
        help="results.csv written by run-plan"
    )

    return parser.parse_args(argv)


def validate_args(args: argparse.Namespace) -> None:
    """Validate command line arguments"""
    if args.verbose and args.quiet:
        raise ValueError("Cannot use both --verbose and --quiet")

    if args.command == "simulate":
        if args.app not in APPLICATIONS and not os.path.isfile(args.app):
            raise ValueError(f"'{args.app}' is neither an application nor a workload file")
        if args.platform not in PRESETS and not os.path.isfile(args.platform):
            raise ValueError(f"'{args.platform}' is neither a platform preset nor a file")
        if args.n < 1:
            raise ValueError("Iteration count must be positive")
        if args.scale_to is not None and args.scale_to < 1:
            raise ValueError("--scale-to must be positive")
        if not 0 <= args.seed < 2 ** 64:
            raise ValueError("Seed must fit in 64 unsigned bits")
        if args.sil_period <= 0:
            raise ValueError("SiL period must be positive")
        if args.technique.upper() != SIL:
            technique(args.technique)
        if args.candidates:
            for name in args.candidates.split(","):
                technique(name)
        Scenario(args.scenario)

    elif args.command == "run-plan":
        if not os.path.isfile(args.plan):
            raise ValueError(f"'{args.plan}' is not a file")
        if args.workers is not None and args.workers < 1:
            raise ValueError("Worker count must be positive")

    elif args.command == "report":
        if not os.path.isfile(args.results):
            raise ValueError(f"'{args.results}' is not a file")


def progress_callback(processed: int, total: int) -> None:
    """Display progress updates"""
    print(f"Finished {processed} of {total} cells...", end='\r', file=sys.stderr)


def run_simulate(args: argparse.Namespace) -> int:
    if args.app in APPLICATIONS:
        workload = generate_workload(application(args.app), args.n, args.seed)
    else:
        workload = load_workload(args.app)
    if args.platform in PRESETS:
        platform = build_platform(args.platform, scale_to=args.scale_to)
    else:
        platform = load_platform_config(args.platform)
    platform = perturb(platform, PerturbationSpec(Scenario(args.scenario), args.seed), HORIZON)

    if args.technique.upper() == SIL:
        candidates = tuple(technique(name) for name in args.candidates.split(",")) if args.candidates \
            else tuple(TechniqueKind)
        sil_cfg = SiLConfig(period=args.sil_period, candidates=candidates, monitor_mode=MonitorMode(args.monitor))
        cfg = SimConfig(workload=workload, platform=platform, sil=sil_cfg, seed=args.seed)
        name = SIL
    else:
        sil_cfg = None
        cfg = SimConfig(workload=workload, platform=platform, technique=technique(args.technique), seed=args.seed)
        name = cfg.technique.value

    if not args.quiet:
        print(f"Simulating {name}: N={workload.n}, P={platform.size}, scenario {args.scenario}", file=sys.stderr)
    result = simulate(cfg)

    print(f"Makespan: {result.makespan:.6f} s")
    print(f"Total overhead: {result.total_overhead:.6f} s")
    print(f"Chunks: {result.chunk_count}")
    if sil_cfg is not None:
        timeline = ", ".join(f"{t:g}s {kind.value}" for t, kind in result.technique_timeline)
        print(f"SiL switches: {result.switch_count}")
        print(f"SiL selections: {timeline}")
        if result.selections:
            mean = sum(r.wall_seconds for r in result.selections) / len(result.selections)
            print(f"Average selection time: {mean:.3f} s")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        app = args.app if args.app in APPLICATIONS else Path(args.app).stem
        platform_name = args.platform if args.platform in PRESETS else Path(args.platform).stem
        row = ResultRow(
            app=app,
            technique=name,
            scenario=args.scenario,
            platform=platform_name,
            seed=args.seed,
            makespan_s=result.makespan,
            total_overhead_s=result.total_overhead,
            chunk_count=result.chunk_count,
            sil_switch_count=result.switch_count if sil_cfg is not None else 0,
            selection_timeline=timeline_text(result.technique_timeline) if sil_cfg is not None else "",
        )
        write_results([row], out / "results.csv")
        write_chunk_log(result.chunk_log, out / "chunks.csv")
        if sil_cfg is not None:
            write_selection_log(result.selections, sil_cfg.candidates, out / "selections.csv")
            write_timelines([row], out / "timelines.csv")
        if not args.quiet:
            print(f"Wrote results to {out}", file=sys.stderr)
    return 0


def run_plan_command(args: argparse.Namespace) -> int:
    plan = ExperimentPlan.from_config(load_plan(args.plan), output_dir=args.out, workers=args.workers)
    if not args.quiet:
        print(f"Running {len(plan.cells())} cells into {plan.output_dir}", file=sys.stderr)
    outcome = run_plan(plan, progress_callback=progress_callback if not args.quiet else None)
    if not args.quiet:
        print(file=sys.stderr)

    print(format_summary(summarize(outcome.rows)))
    print(f"\n{len(outcome.rows)} cells succeeded, {len(outcome.failures)} failed")
    return 0 if outcome.ok else 2


def run_report(args: argparse.Namespace) -> int:
    from .charts import write_charts

    rows = read_results(args.results)
    summary = summarize(rows)
    print(format_summary(summary))
    if rows:
        paths = write_charts(rows, summary, Path(args.results).parent / "charts")
        if not args.quiet:
            print(f"Wrote {len(paths)} chart(s)", file=sys.stderr)
    return 0


def main(argv: Optional[List[str]] = None) -> None:
    """Main CLI entry point"""
    try:
        args = parse_args(argv)
        validate_args(args)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)

    setup_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)

    try:
        if args.command == "simulate":
            code = run_simulate(args)
        elif args.command == "run-plan":
            code = run_plan_command(args)
        else:
            code = run_report(args)

    except KeyboardInterrupt:
        if not args.quiet:
            print("\n\nOperation cancelled by user", file=sys.stderr)
        sys.exit(130)

    except DlsSilError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)

    except Exception as e:
        print(f"\nError: {e}", file=sys.stderr)
        sys.exit(1)

    sys.exit(code)


if __name__ == "__main__":
    main()

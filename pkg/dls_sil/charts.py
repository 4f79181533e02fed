"""
Static comparison charts: one grouped bar chart per application
"""

from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .config import SIL  # noqa: E402
from .harness import ResultRow, SummaryRow  # noqa: E402
from .sched import TechniqueKind  # noqa: E402

BAND_COLOR = "#c8f0dc"


def _technique_order(names) -> List[str]:
    known = [kind.value for kind in TechniqueKind] + [SIL]
    return sorted(set(names), key=lambda name: (known.index(name) if name in known else len(known), name))


def plot_app(app: str, rows: Sequence[ResultRow], summary: Sequence[SummaryRow], path: Path) -> Path:
    """
    Execution time per scenario, one bar per technique

    The shaded span behind each scenario group runs from the fastest to the
    slowest single technique.
    """
    scenarios = sorted({row.scenario for row in rows})
    techniques = _technique_order(row.technique for row in rows)
    makespans: Dict[tuple, List[float]] = {}
    for row in rows:
        makespans.setdefault((row.scenario, row.technique), []).append(row.makespan_s)
    bands = {s.scenario: (s.band_min_s, s.band_max_s) for s in summary if s.app == app}

    width = 0.8 / len(techniques)
    fig, ax = plt.subplots(figsize=(max(8, 1.2 * len(scenarios)), 5))
    for i, scenario in enumerate(scenarios):
        if scenario in bands:
            low, high = bands[scenario]
            ax.fill_between([i - 0.45, i + 0.45], low, high, color=BAND_COLOR, zorder=0)
    for j, technique in enumerate(techniques):
        xs, heights = [], []
        for i, scenario in enumerate(scenarios):
            values = makespans.get((scenario, technique))
            if values:
                xs.append(i - 0.4 + (j + 0.5) * width)
                heights.append(sum(values) / len(values))
        ax.bar(xs, heights, width=width, label=technique, zorder=2,
               color="black" if technique == SIL else None)

    ax.set_xticks(range(len(scenarios)))
    ax.set_xticklabels(scenarios, rotation=45, ha="right")
    ax.set_ylabel("Execution time (s)")
    ax.set_title(app)
    ax.legend(ncol=min(len(techniques), 6), fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_charts(rows: Sequence[ResultRow], summary: Sequence[SummaryRow], out_dir: Path) -> List[Path]:
    """One chart per application, per application and platform when a plan has several platforms"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    platforms = sorted({row.platform for row in rows})
    paths = []
    for app in sorted({row.app for row in rows}):
        for platform in platforms:
            app_rows = [row for row in rows if row.app == app and row.platform == platform]
            if not app_rows:
                continue
            app_summary = [s for s in summary if s.platform == platform]
            name = app if len(platforms) == 1 else f"{app}_{platform}"
            paths.append(plot_app(app, app_rows, app_summary, out_dir / f"{name}.png"))
    return paths

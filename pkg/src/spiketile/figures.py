"""Figure rendering for reports, comparisons, and sweeps (PNG, Agg backend)."""
from __future__ import annotations

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .report import Comparison, Report
from .stats import PHASES

# dropping the version string keeps output bytes stable across environments
_PNG_METADATA = {"Software": None}

_BAR_COLOR = "#4878cf"
_BASELINE_COLOR = "#b0b0b0"


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, format="png", metadata=_PNG_METADATA)


def save_phase_figure(report: Report, path) -> None:
    """Bar chart of cycles charged to each schedule phase."""
    fig = Figure(figsize=(5.0, 3.4), dpi=120)
    ax = fig.add_subplot(111)
    cycles = [report.phase_cycles[p] for p in PHASES]
    ax.bar(range(len(PHASES)), cycles, color=_BAR_COLOR)
    ax.set_xticks(range(len(PHASES)))
    ax.set_xticklabels(PHASES)
    ax.set_ylabel("cycles")
    ax.set_title(f"{report.workload} {report.array} {report.design}: "
                 f"{report.total_cycles} cycles, "
                 f"{report.wall_time_ns:.6g} ns")
    fig.tight_layout()
    _save(fig, path)


def save_comparison_figure(comparison: Comparison, path) -> None:
    """Horizontal bars of the percentage deltas, one per metric."""
    rows = comparison.rows()
    labels = [key.removesuffix("_percent").replace("_", " ") for key, _ in rows]
    values = [round(v, 1) for _, v in rows]
    fig = Figure(figsize=(6.0, 0.5 * len(rows) + 1.6), dpi=120)
    ax = fig.add_subplot(111)
    pos = range(len(rows))
    ax.barh(pos, values, color=_BAR_COLOR)
    ax.set_yticks(list(pos))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.axvline(0.0, color=_BASELINE_COLOR, linewidth=1.0)
    for y, v in zip(pos, values):
        ax.annotate(f"{v:.1f}", (v, y), xytext=(4, 0),
                    textcoords="offset points", va="center", fontsize=8)
    ax.set_xlabel("percent")
    ax.set_title(f"{comparison.workload} {comparison.array}: "
                 f"{comparison.baseline_design} vs {comparison.candidate_design}")
    fig.tight_layout()
    _save(fig, path)


def save_sweep_figure(x_values: list[float], series: dict[str, list[float]],
                      x_label: str, path, title: str = "") -> None:
    """One line per series over the swept parameter values."""
    fig = Figure(figsize=(5.4, 3.4), dpi=120)
    ax = fig.add_subplot(111)
    for name, ys in series.items():
        ax.plot(x_values, ys, marker="o", label=name)
    ax.set_xlabel(x_label)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)

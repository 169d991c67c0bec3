"""Rich console rendering for the CLI.

This module provides:
- Curve summary panel (start, inflection and final rates)
- Proximity, metrics and sweep tables
- Error panel shared by every subcommand

Everything prints to stderr; stdout carries CSV only.
"""

from typing import Optional

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from analysis import ProximityReport, inflection_fraction, ratio_R
from harness import MetricsRecord, SweepRow
from logger_config import get_logger
from schedulers import Htd, LearningRateCurve, ScheduleSpec, describe

console = Console(stderr=True)
logger = get_logger()


def show_curve_summary(spec: ScheduleSpec, lr_curve: LearningRateCurve) -> None:
    """Panel with the schedule's first, inflection and last samples."""
    rates = lr_curve.rates
    lines = [
        f"[bold]{describe(spec)}[/bold] over T={lr_curve.horizon}",
        f"start  lr(0) = {rates[0]:.6g}",
        f"final  lr(T) = {rates[-1]:.6g}",
    ]
    if isinstance(spec, Htd):
        s_star = inflection_fraction(spec.lower, spec.upper)
        lines.insert(2, f"inflection at t = {s_star * lr_curve.horizon:.1f} (R = {ratio_R(spec.lower, spec.upper):g})")
    console.print(Panel("\n".join(lines), title="Learning-rate curve", border_style="cyan"))


def show_proximity(report: ProximityReport, label_a: str, label_b: str) -> None:
    """Table for a sup-norm comparison."""
    table = Table(title=f"{label_a} vs {label_b}", show_header=False, box=None)
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="white")
    table.add_row("grid points", str(report.grid_points))
    table.add_row("max |a - b|", f"{report.max_abs_diff:.6g}")
    table.add_row("relative", f"{report.relative_diff:.4%}")
    table.add_row("at progress", f"{report.argmax_progress:.4f}")
    console.print(table)


def show_metrics(records: list[MetricsRecord], last: int = 10) -> None:
    """Table of the last `last` epochs of a run."""
    table = Table(title="Training metrics")
    for name in ("epoch", "lr", "train loss", "train err", "test err"):
        table.add_column(name, justify="right")
    for r in records[-last:]:
        table.add_row(
            str(r.epoch), f"{r.lr:.4g}", f"{r.train_loss:.4f}", f"{r.train_error:.4f}", f"{r.test_error:.4f}"
        )
    console.print(table)


def show_sweep(rows: list[SweepRow]) -> None:
    """Table of sweep results, best mean test error highlighted."""
    best: Optional[float] = min((row.mean_test_error for row in rows), default=None)
    table = Table(title="Sweep results")
    for name in ("value", "schedule", "mean test err", "median test err", "repeats"):
        table.add_column(name, justify="right")
    for row in rows:
        style = "bold green" if row.mean_test_error == best else None
        table.add_row(
            f"{row.value:g}",
            row.label,
            f"{row.mean_test_error:.4f}",
            f"{row.median_test_error:.4f}",
            str(len(row.test_errors)),
            style=style,
        )
    console.print(table)


def show_error(message: str) -> None:
    """Red error panel."""
    console.print(Panel(f"[red]❌ {escape(message)}[/red]", title="Error", border_style="red"))

"""Comparison reports: single-hop vs multi-hop accuracy tables and plot data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .scoring import ScoreSummary

IMPROVEMENT_NOTE = (
    "Note: improvement columns are recomputed from the accuracy columns "
    "(absolute difference in percentage points; relative change in percent). "
    "Externally reported improvement figures that match neither definition "
    "are not reproduced here."
)

_HEADERS = (
    "Configuration",
    "Single-hop accuracy (%)",
    "Multi-hop accuracy (%)",
    "Abs. improvement (pp)",
    "Rel. improvement (%)",
)


@dataclass(frozen=True)
class ReportRow:
    """One comparison line; accuracies are percentages rounded to 2 decimals."""

    label: str
    single_accuracy_pct: float
    multi_accuracy_pct: float
    abs_improvement_pp: float
    rel_improvement_pct: float


def compare_report(single: ScoreSummary, multi: ScoreSummary, label: str) -> ReportRow:
    """Build a comparison row from two score summaries.

    Both improvement flavors are reported explicitly. When the single-hop
    accuracy is zero the relative improvement is infinite (rendered "inf"),
    or zero if both sides are zero.
    """
    if single.empty or multi.empty:
        raise ValueError("cannot compare empty score summaries")
    single_pct = round(single.accuracy * 100, 2)
    multi_pct = round(multi.accuracy * 100, 2)
    absolute = round(multi_pct - single_pct, 2)
    if single_pct > 0:
        relative = round((multi_pct - single_pct) / single_pct * 100, 2)
    elif multi_pct > 0:
        relative = math.inf
    else:
        relative = 0.0
    return ReportRow(label, single_pct, multi_pct, absolute, relative)


def _fmt(value: float, signed: bool = False) -> str:
    if math.isinf(value):
        return "+inf" if signed and value > 0 else "inf"
    return f"{value:+.2f}" if signed else f"{value:.2f}"


def _cells(row: ReportRow) -> tuple[str, ...]:
    return (
        row.label,
        _fmt(row.single_accuracy_pct),
        _fmt(row.multi_accuracy_pct),
        _fmt(row.abs_improvement_pp, signed=True),
        _fmt(row.rel_improvement_pct, signed=True),
    )


def render_text_table(rows: Sequence[ReportRow], include_note: bool = True) -> str:
    """Aligned plain-text comparison table."""
    body = [_cells(row) for row in rows]
    widths = [
        max(len(_HEADERS[col]), *(len(line[col]) for line in body)) if body else len(_HEADERS[col])
        for col in range(len(_HEADERS))
    ]
    def fmt_line(cells: Sequence[str]) -> str:
        return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()
    lines = [fmt_line(_HEADERS), fmt_line(tuple("-" * w for w in widths))]
    lines.extend(fmt_line(cells) for cells in body)
    if include_note:
        lines.extend(["", IMPROVEMENT_NOTE])
    return "\n".join(lines) + "\n"


def render_markdown_table(rows: Sequence[ReportRow], include_note: bool = True) -> str:
    lines = [
        "| " + " | ".join(_HEADERS) + " |",
        "| " + " | ".join("---" for _ in _HEADERS) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(_cells(row)) + " |")
    if include_note:
        lines.extend(["", IMPROVEMENT_NOTE])
    return "\n".join(lines) + "\n"


def emit_plot_data(rows: Sequence[ReportRow], path: str | Path) -> None:
    """CSV of the comparison rows, one line per configuration."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["configuration", "single_accuracy", "multi_accuracy", "abs_improvement_pp", "rel_improvement_pct"]
        )
        for row in rows:
            writer.writerow(
                [
                    row.label,
                    f"{row.single_accuracy_pct:.2f}",
                    f"{row.multi_accuracy_pct:.2f}",
                    _plain(row.abs_improvement_pp),
                    _plain(row.rel_improvement_pct),
                ]
            )


def _plain(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"

"""Text and CSV renderers for the loss-summary and metric-matrix tables.

Cells may be floats (rendered with 4 decimals), strings (rendered
verbatim, so values parsed back from a report reproduce byte-exactly),
or None (rendered as "-", the blank-cell mark of the metric matrix).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .evalkit import METRIC_NAMES, ScenarioReport
from .fedcore import LossSummary

Cell = "float | str | None"

LOSS_TABLE_HEADER = ("paradigm", "maximum", "minimum", "mean", "median")
LOSS_TABLE_TITLES = ("Learning Paradigm", "Maximum", "Minimum", "Mean", "Median")
METRIC_TABLE_HEADER = ("scenario", "setting", *METRIC_NAMES, "samples")
METRIC_TABLE_TITLES = (
    "Experiment Scenario",
    "Setting",
    "Context Recall",
    "Factual Correctness",
    "Faithfulness",
    "Semantic Similarity",
    "Answer Relevancy",
    "Samples",
)


def format_cell(value) -> str:
    """Render one table cell; strings pass through untouched."""
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return f"{value:.4f}"


def loss_table_rows(entries: Sequence[tuple[str, object]]) -> list[list[str]]:
    """Rows from (label, LossSummary) or (label, 4-cell sequence) pairs."""
    rows = []
    for label, summary in entries:
        if isinstance(summary, LossSummary):
            cells = (summary.maximum, summary.minimum, summary.mean, summary.median)
        else:
            cells = tuple(summary)
            if len(cells) != 4:
                raise ValueError(f"loss row for {label!r} needs 4 cells, got {len(cells)}")
        rows.append([label, *(format_cell(cell) for cell in cells)])
    return rows


def metric_table_rows(reports: Sequence[ScenarioReport]) -> list[list[str]]:
    """Rows from aggregated scenario reports; blank means render as '-'."""
    rows = []
    for report in reports:
        cells = [report.scenario, report.setting]
        cells.extend(format_cell(report.means[name]) for name in METRIC_NAMES)
        cells.append(str(report.samples))
        rows.append(cells)
    return rows


def render_text_table(titles: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Fixed-width aligned table with a header rule."""
    widths = [len(title) for title in titles]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(title.ljust(widths[i]) for i, title in enumerate(titles)).rstrip(),
        "  ".join("-" * width for width in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Inverse of render_csv: (header, rows) with all cells as strings."""
    reader = csv.reader(io.StringIO(text))
    table = list(reader)
    if not table:
        raise ValueError("empty table")
    return table[0], table[1:]


def write_table(
    path_base: str | Path,
    header: Sequence[str],
    titles: Sequence[str],
    rows: Sequence[Sequence[str]],
) -> tuple[Path, Path]:
    """Write <base>.csv and <base>.txt; returns both paths."""
    base = Path(path_base)
    csv_path = base.with_suffix(".csv")
    txt_path = base.with_suffix(".txt")
    csv_path.write_text(render_csv(header, rows), encoding="utf-8")
    txt_path.write_text(render_text_table(titles, rows), encoding="utf-8")
    return csv_path, txt_path

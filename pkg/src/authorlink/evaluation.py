"""Scoring decisions against gold labels.

Metrics live as raw fractions; rounding to display percentages happens only
when a table is rendered, with ties at the final digit rounded half up.
Abstentions score as predicted-no but are tallied separately so a cautious
method is distinguishable from a wrong one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import bibcoupling as bc
from .model import CandidatePair, Decision, Method, Verdict, round_half_up

logger = logging.getLogger(__name__)


class EvalError(ValueError):
    """The decision set does not line up with the gold pairs."""


def read_decisions(path: str | Path) -> list[Decision]:
    """Load a decisions file written by a run, one JSON object per line."""
    decisions = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
                decisions.append(Decision(
                    record_id=str(doc["record_id"]), auid=str(doc["auid"]),
                    verdict=Verdict(doc["verdict"]), method=Method(doc["method"]),
                    score=doc.get("score"), explanation=doc.get("explanation"),
                    evidence=doc.get("evidence"),
                ))
            except (KeyError, ValueError) as exc:
                raise EvalError(f"{path}:{line_no}: bad decision row: {exc}") from exc
    return decisions


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts, with abstentions folded into the no column."""

    tp: int
    fp: int
    fn: int
    tn: int
    abstain_count: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(decisions: Iterable[Decision], gold_pairs: Sequence[CandidatePair]) -> ConfusionMatrix:
    """Count the four cells over the gold pairs.

    Every gold pair must carry a label and appear exactly once in the
    decisions; decisions for pairs outside the gold list are ignored.
    """
    by_pair: dict[tuple[str, str], Decision] = {}
    for decision in decisions:
        key = (decision.record_id, decision.auid)
        if key in by_pair:
            raise EvalError(f"duplicate decision for pair {key}")
        by_pair[key] = decision
    tp = fp = fn = tn = abstain = 0
    seen: set[tuple[str, str]] = set()
    for pair in gold_pairs:
        key = (pair.record.record_id, pair.auid)
        if key in seen:
            raise EvalError(f"gold lists pair {key} twice")
        seen.add(key)
        if pair.gold is None:
            raise EvalError(f"gold pair {key} has no label")
        decision = by_pair.get(key)
        if decision is None:
            raise EvalError(f"no decision for gold pair {key}")
        if decision.verdict is Verdict.ABSTAIN:
            abstain += 1
        predicted_yes = decision.verdict is Verdict.YES
        if pair.gold:
            tp, fn = (tp + 1, fn) if predicted_yes else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if predicted_yes else (fp, tn + 1)
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn, abstain_count=abstain)


@dataclass(frozen=True)
class MetricsReport:
    """Precision, recall, F1 and accuracy as raw fractions.

    Undefined ratios (empty denominators) are reported as 0.0 with the
    degenerate flag set, never as an exception.
    """

    matrix: ConfusionMatrix
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: bool = False

    def display(self) -> dict[str, str]:
        """Percentages rounded half-up to one decimal, as printed in tables."""
        return {
            "precision": f"{round_half_up(self.precision * 100.0):.1f}",
            "recall": f"{round_half_up(self.recall * 100.0):.1f}",
            "f1": f"{round_half_up(self.f1 * 100.0):.1f}",
            "accuracy": f"{round_half_up(self.accuracy * 100.0):.1f}",
        }


def metrics(matrix: ConfusionMatrix) -> MetricsReport:
    degenerate = False
    if matrix.tp + matrix.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = matrix.tp / (matrix.tp + matrix.fp)
    if matrix.tp + matrix.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = matrix.tp / (matrix.tp + matrix.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    if matrix.total == 0:
        accuracy, degenerate = 0.0, True
    else:
        accuracy = (matrix.tp + matrix.tn) / matrix.total
    if degenerate:
        logger.warning("degenerate metrics: matrix %s has an empty denominator", matrix)
    return MetricsReport(matrix=matrix, precision=precision, recall=recall,
                         f1=f1, accuracy=accuracy, degenerate=degenerate)


@dataclass(frozen=True)
class MethodRow:
    """One rendered table row: a method name, its metrics and wall time."""

    name: str
    report: MetricsReport
    time_seconds: float | None = None


_HEADERS = ("Method", "Precision", "Recall", "F1", "Accuracy", "Time (s)")


def _row_cells(row: MethodRow) -> tuple[str, ...]:
    shown = row.report.display()
    time_cell = "-" if row.time_seconds is None else f"{row.time_seconds:.3f}"
    return (row.name, shown["precision"], shown["recall"], shown["f1"],
            shown["accuracy"], time_cell)


def format_table(rows: Sequence[MethodRow]) -> str:
    """Plain-text comparison table, one method per row."""
    cells = [_HEADERS] + [_row_cells(row) for row in rows]
    widths = [max(len(line[i]) for line in cells) for i in range(len(_HEADERS))]
    out = []
    for line_no, line in enumerate(cells):
        out.append("  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip())
        if line_no == 0:
            out.append("  ".join("-" * width for width in widths))
    return "\n".join(out) + "\n"


def table_csv(rows: Sequence[MethodRow]) -> str:
    """CSV mirror of the comparison table with the same displayed values."""
    lines = ["method,precision,recall,f1,accuracy,time_s"]
    for row in rows:
        shown = row.report.display()
        time_cell = "" if row.time_seconds is None else f"{row.time_seconds:.3f}"
        lines.append(",".join((row.name, shown["precision"], shown["recall"],
                               shown["f1"], shown["accuracy"], time_cell)))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SweepCell:
    """Metrics for one (threshold, window) combination."""

    threshold: float
    window: bc.TimeWindow
    report: MetricsReport


def format_sweep(cells: Sequence[SweepCell]) -> str:
    """Grid of F1 display values, thresholds down the side, windows across."""
    thresholds = sorted({cell.threshold for cell in cells})
    windows = sorted({cell.window for cell in cells}, key=lambda w: (w.start_year, w.end_year))
    by_key = {(cell.threshold, cell.window): cell for cell in cells}
    header = ["threshold"] + [str(window) for window in windows]
    lines = [[f"{threshold:g}"] + [
        by_key[(threshold, window)].report.display()["f1"]
        if (threshold, window) in by_key else "-"
        for window in windows
    ] for threshold in thresholds]
    cells_txt = [header] + lines
    widths = [max(len(line[i]) for line in cells_txt) for i in range(len(header))]
    out = []
    for line_no, line in enumerate(cells_txt):
        out.append("  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip())
        if line_no == 0:
            out.append("  ".join("-" * width for width in widths))
    return "\n".join(out) + "\n"


def sweep_csv(cells: Sequence[SweepCell]) -> str:
    """One row per combination, displayed percentage values."""
    lines = ["threshold,window,precision,recall,f1,accuracy"]
    ordered = sorted(cells, key=lambda c: (c.threshold, c.window.start_year, c.window.end_year))
    for cell in ordered:
        shown = cell.report.display()
        lines.append(",".join((f"{cell.threshold:g}", str(cell.window), shown["precision"],
                               shown["recall"], shown["f1"], shown["accuracy"])))
    return "\n".join(lines) + "\n"


def write_text(content: str, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(content)

"""Convergence detection, mode comparison and result files.

Comparison quantities, all read at each run's own convergence record:

* training time: virtual seconds;
* communication overhead: cumulative modeled bytes;
* convergence iterations: server aggregation index;
* accuracy: 1 - validation error.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import DataFormatError, FedBoostError
from .models.config_model import ConvergenceSpec
from .models.trace_model import TRACE_COLUMNS, MetricsRecord, SimTrace
from .utils.logger import log, log_and_raise_error

FLOAT_FORMAT = "%.17g"
DELTA_FIELDS = (
    "training_time_reduction_pct",
    "comm_overhead_reduction_pct",
    "convergence_rounds_reduction_pct",
    "accuracy_delta_pp",
)

TraceLike = Union[SimTrace, Sequence[MetricsRecord]]


def _records(trace: TraceLike) -> Sequence[MetricsRecord]:
    return trace.records if isinstance(trace, SimTrace) else trace


def detect_convergence(
    trace: TraceLike, target_error: float = 0.10, plateau_tol: float = 1e-4, window: int = 5
) -> Optional[int]:
    """
    Find the aggregation at which a run converged.

    A record converges when its validation error is at most ``target_error``,
    or when it closes ``window`` consecutive steps whose error changed by less
    than ``plateau_tol``.

    Args:
        trace: a trace or its records.
        target_error: validation error to reach.
        plateau_tol: largest change still counted as flat.
        window: number of consecutive flat steps that make a plateau.

    Returns:
        The aggregation index of the first converged record, or None.
    """
    if window < 1:
        log_and_raise_error(f"Plateau window must be positive, got {window}.")
    records = _records(trace)
    flat_steps = 0
    for i, record in enumerate(records):
        if record.validation_error <= target_error:
            return record.aggregation_index
        if i > 0 and abs(record.validation_error - records[i - 1].validation_error) < plateau_tol:
            flat_steps += 1
            if flat_steps >= window:
                return record.aggregation_index
        else:
            flat_steps = 0
    return None


class ComparisonStatus(str, Enum):
    COMPARABLE = "comparable"
    NON_COMPARABLE = "non-comparable"


@dataclass(frozen=True)
class ModeTotals:
    """One run's values at its convergence record (all None if it never converged)."""

    mode: str
    converged_at: Optional[int] = None
    virtual_time: Optional[float] = None
    cumulative_uploads: Optional[int] = None
    cumulative_broadcasts: Optional[int] = None
    cumulative_bytes: Optional[int] = None
    validation_error: Optional[float] = None
    local_rounds: Optional[int] = None

    @property
    def accuracy(self) -> Optional[float]:
        return None if self.validation_error is None else 1.0 - self.validation_error


@dataclass(frozen=True)
class ComparisonReport:
    """Relative improvement of a candidate run over a baseline run.

    Each reduction is 100 * (baseline - candidate) / baseline; the accuracy
    delta is in percentage points. Deltas are None unless both runs converged.
    """

    status: ComparisonStatus
    reason: str
    candidate: ModeTotals
    baseline: ModeTotals
    training_time_reduction_pct: Optional[float] = None
    comm_overhead_reduction_pct: Optional[float] = None
    convergence_rounds_reduction_pct: Optional[float] = None
    accuracy_delta_pp: Optional[float] = None

    @property
    def comparable(self) -> bool:
        return self.status == ComparisonStatus.COMPARABLE

    def as_row(self) -> Dict[str, object]:
        """Flat field/value mapping in a fixed column order."""
        row: Dict[str, object] = {"status": self.status.value, "reason": self.reason}
        for side, totals in (("candidate", self.candidate), ("baseline", self.baseline)):
            for key, value in asdict(totals).items():
                row[f"{side}_{key}"] = value
            row[f"{side}_accuracy"] = totals.accuracy
        for key in DELTA_FIELDS:
            row[key] = getattr(self, key)
        return row


def mode_totals(trace: SimTrace, convergence: ConvergenceSpec) -> ModeTotals:
    """Read a run's values at its convergence record."""
    index = detect_convergence(trace, convergence.target_error, convergence.plateau_tol, convergence.window)
    if index is None:
        return ModeTotals(mode=trace.mode)
    record = trace.record_at(index)
    return ModeTotals(
        mode=trace.mode,
        converged_at=index,
        virtual_time=record.virtual_time,
        cumulative_uploads=record.cumulative_uploads,
        cumulative_broadcasts=record.cumulative_broadcasts,
        cumulative_bytes=record.cumulative_bytes,
        validation_error=record.validation_error,
        local_rounds=trace.local_rounds_until(record.virtual_time),
    )


def _reduction(baseline: float, candidate: float) -> Optional[float]:
    if baseline == 0:
        return 0.0 if candidate == 0 else None
    return 100.0 * (baseline - candidate) / baseline


def compare_modes(
    candidate: SimTrace, baseline: SimTrace, convergence: ConvergenceSpec = ConvergenceSpec()
) -> ComparisonReport:
    """
    Compare two runs at their own convergence records.

    Args:
        candidate: the run being evaluated.
        baseline: the reference run.
        convergence: convergence detection parameters.

    Returns:
        A report; non-comparable (with a reason and no deltas) when either
        run did not converge or a baseline quantity is zero.
    """
    candidate_totals = mode_totals(candidate, convergence)
    baseline_totals = mode_totals(baseline, convergence)
    missing = [t.mode for t in (candidate_totals, baseline_totals) if t.converged_at is None]
    if missing:
        return ComparisonReport(
            status=ComparisonStatus.NON_COMPARABLE,
            reason=f"did not converge: {', '.join(missing)}",
            candidate=candidate_totals,
            baseline=baseline_totals,
        )

    deltas = {
        "training_time_reduction_pct": _reduction(baseline_totals.virtual_time, candidate_totals.virtual_time),
        "comm_overhead_reduction_pct": _reduction(
            baseline_totals.cumulative_bytes, candidate_totals.cumulative_bytes
        ),
        "convergence_rounds_reduction_pct": _reduction(
            baseline_totals.converged_at, candidate_totals.converged_at
        ),
    }
    undefined = [key for key, value in deltas.items() if value is None]
    if undefined:
        return ComparisonReport(
            status=ComparisonStatus.NON_COMPARABLE,
            reason=f"zero baseline value for: {', '.join(undefined)}",
            candidate=candidate_totals,
            baseline=baseline_totals,
        )
    return ComparisonReport(
        status=ComparisonStatus.COMPARABLE,
        reason="",
        candidate=candidate_totals,
        baseline=baseline_totals,
        accuracy_delta_pp=100.0 * (baseline_totals.validation_error - candidate_totals.validation_error),
        **deltas,
    )


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        log_and_raise_error(f"Could not write {path}. Error: {e}.")
    return path


def _write_text(text: str, path: Path) -> Path:
    try:
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as e:
        log_and_raise_error(f"Could not write {path}. Error: {e}.")
    return path


def export_trace_csv(trace: SimTrace, path: Union[str, Path]) -> Path:
    """Write one CSV row per record under the header ``agg,vtime,uploads,broadcasts,bytes,val_err,train_err,interval``."""
    frame = pd.DataFrame([record.as_row() for record in trace.records], columns=list(TRACE_COLUMNS))
    return _write_frame(frame, Path(path))


def read_trace_csv(path: Union[str, Path]) -> Tuple[MetricsRecord, ...]:
    """
    Parse a trace CSV written by export_trace_csv.

    Raises:
        DataFormatError: Unreadable file or unexpected header.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        log_and_raise_error(f"Could not read trace from {path}. Error: {e}.", DataFormatError)
    if tuple(frame.columns) != TRACE_COLUMNS:
        log_and_raise_error(f"{path}: unexpected trace header {list(frame.columns)}.", DataFormatError)
    return tuple(
        MetricsRecord(
            aggregation_index=int(agg),
            virtual_time=float(vtime),
            cumulative_uploads=int(uploads),
            cumulative_broadcasts=int(broadcasts),
            cumulative_bytes=int(n_bytes),
            validation_error=float(val_err),
            training_error=float(train_err),
            current_interval=int(interval),
        )
        for agg, vtime, uploads, broadcasts, n_bytes, val_err, train_err, interval in frame.itertuples(
            index=False, name=None
        )
    )


def _format_value(value: object) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def format_report(report: ComparisonReport) -> str:
    """Aligned two-column plain-text table of a report."""
    row = {key: _format_value(value) for key, value in report.as_row().items()}
    return pd.Series(row, dtype=object).to_string()


def export_report(report: ComparisonReport, path: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Write a report as CSV at ``path`` and as an aligned table next to it (``.txt``).

    Returns:
        The CSV and text paths.
    """
    path = Path(path)
    csv_path = _write_frame(pd.DataFrame([report.as_row()]), path)
    text_path = _write_text(format_report(report), path.with_suffix(".txt"))
    log("Wrote comparison report.", csv=str(csv_path), status=report.status.value)
    return csv_path, text_path


def summarize_reports(
    rows: Sequence[Tuple[str, int, ComparisonReport]], accuracy_band_pp: float = 1.5
) -> pd.DataFrame:
    """
    Summarize a multi-seed sweep per preset.

    Args:
        rows: (preset name, seed, report) for every run.
        accuracy_band_pp: accuracy deltas outside +/- this band are flagged.

    Returns:
        One row per preset: run counts, mean/min/max of each delta over the
        comparable runs, and the seeds that were non-comparable or outside
        the accuracy band.
    """
    if not rows:
        raise FedBoostError("Nothing to summarize.")
    frame = pd.DataFrame(
        [
            {"preset": name, "seed": seed, "comparable": report.comparable}
            | {key: np.nan if getattr(report, key) is None else getattr(report, key) for key in DELTA_FIELDS}
            for name, seed, report in rows
        ]
    )
    presets = sorted(frame["preset"].unique())
    comparable = frame[frame["comparable"]]
    stats = comparable.groupby("preset")[list(DELTA_FIELDS)].agg(["mean", "min", "max"])
    stats.columns = [f"{field}_{stat}" for field, stat in stats.columns]
    summary = stats.reindex(presets)
    summary.insert(0, "runs", frame.groupby("preset").size().reindex(presets))
    summary.insert(1, "comparable_runs", comparable.groupby("preset").size().reindex(presets, fill_value=0))

    def seeds(mask: pd.Series) -> pd.Series:
        return frame[mask].groupby("preset")["seed"].agg(lambda s: ";".join(str(v) for v in sorted(s)))

    summary["non_comparable_seeds"] = seeds(~frame["comparable"]).reindex(presets, fill_value="")
    outside_band = frame["comparable"] & (frame["accuracy_delta_pp"].abs() > accuracy_band_pp)
    summary["accuracy_band_failures"] = seeds(outside_band).reindex(presets, fill_value="")
    summary.index.name = "preset"
    return summary.reset_index()


def export_summary(summary: pd.DataFrame, path: Union[str, Path]) -> Tuple[Path, Path]:
    """Write a sweep summary as CSV at ``path`` and as an aligned table next to it."""
    path = Path(path)
    csv_path = _write_frame(summary, path)
    text_path = _write_text(summary.to_string(index=False, float_format=lambda v: f"{v:.4f}"), path.with_suffix(".txt"))
    return csv_path, text_path

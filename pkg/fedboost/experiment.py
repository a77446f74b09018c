"""Experiment orchestration: one candidate-vs-baseline run, and multi-seed sweeps."""

from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd

from .exceptions import ConfigError
from .fedsim import mode_synchronous_baseline, run_simulation
from .metrics import ComparisonReport, compare_modes, export_report, export_summary, export_trace_csv, summarize_reports
from .models.config_model import ExperimentConfig, Mode
from .models.trace_model import SimTrace
from .utils.logger import log, log_and_raise_error

TRACE_FILES = {
    Mode.ASYNC_ADAPTIVE: "trace_adaptive.csv",
    Mode.ASYNC_FIXED: "trace_fixed.csv",
    Mode.SYNCHRONOUS: "trace_baseline.csv",
}
REPORT_FILE = "report.csv"
SUMMARY_FILE = "summary.csv"

_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


@dataclass(frozen=True)
class RunResult:
    """Traces, report and written files of one run."""

    config: ExperimentConfig
    output_dir: Path
    baseline: SimTrace
    candidate: Optional[SimTrace] = None
    report: Optional[ComparisonReport] = None
    files: Tuple[Path, ...] = ()

    @property
    def converged(self) -> bool:
        traces = [self.baseline] if self.candidate is None else [self.candidate, self.baseline]
        return all(trace.converged_at is not None for trace in traces)


def parse_seeds(text: str) -> List[int]:
    """
    Parse a seed list such as ``1..5`` (inclusive) or ``1,2,5``.

    Raises:
        ConfigError: Malformed or empty list.
    """
    match = _RANGE.match(text)
    if match:
        first, last = int(match.group(1)), int(match.group(2))
        if first > last:
            log_and_raise_error(f"Seed range {text!r} is empty.", ConfigError)
        return list(range(first, last + 1))
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        log_and_raise_error(f"Seeds must look like 1..5 or 1,2,5, got {text!r}.", ConfigError)
    if not seeds:
        log_and_raise_error("No seeds given.", ConfigError)
    return seeds


def _prepare_dir(output_dir: Path) -> Path:
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        log_and_raise_error(f"Could not create output directory {output_dir}. Error: {e}.")
    return output_dir


def run_single(config: ExperimentConfig, output_dir: Union[str, Path]) -> RunResult:
    """
    Run the configured mode and the synchronous baseline on the same federation.

    Writes the candidate trace, ``trace_baseline.csv`` and the comparison
    report (``report.csv`` and ``report.txt``). A synchronous candidate is the
    baseline itself: only its trace is written.

    Args:
        config: validated experiment config.
        output_dir: directory for the result files, created if missing.

    Returns:
        The run result.
    """
    output_dir = _prepare_dir(Path(output_dir))
    mode = Mode(config.mode)
    log("Running experiment.", name=config.name, mode=mode.value, seed=config.dataset.seed, out=str(output_dir))

    baseline = mode_synchronous_baseline(config)
    baseline_file = export_trace_csv(baseline, output_dir / TRACE_FILES[Mode.SYNCHRONOUS])
    if mode == Mode.SYNCHRONOUS:
        return RunResult(config=config, output_dir=output_dir, baseline=baseline, files=(baseline_file,))

    candidate = run_simulation(config)
    candidate_file = export_trace_csv(candidate, output_dir / TRACE_FILES[mode])
    report = compare_modes(candidate, baseline, config.convergence)
    report_files = export_report(report, output_dir / REPORT_FILE)
    return RunResult(
        config=config,
        output_dir=output_dir,
        baseline=baseline,
        candidate=candidate,
        report=report,
        files=(candidate_file, baseline_file, *report_files),
    )


@dataclass(frozen=True)
class SweepResult:
    results: Tuple[RunResult, ...]
    summary: Optional[pd.DataFrame] = None
    files: Tuple[Path, ...] = ()

    @property
    def converged(self) -> bool:
        return all(result.converged for result in self.results)


def run_sweep(
    configs: Sequence[ExperimentConfig],
    seeds: Sequence[int],
    output_dir: Union[str, Path],
    workers: int = 1,
) -> SweepResult:
    """
    Run every config under every seed and summarize the comparisons.

    Each member writes to ``<output_dir>/<config name>/seed_<seed>/``; the
    per-preset summary goes to ``summary.csv`` and ``summary.txt``.

    Args:
        configs: configs with distinct names.
        seeds: seeds applied with ExperimentConfig.with_seed.
        output_dir: root of the sweep output tree.
        workers: process count; 1 runs in this process.

    Returns:
        All run results, in config then seed order, and the summary.
    """
    names = [config.name for config in configs]
    if len(set(names)) != len(names):
        log_and_raise_error(f"Sweep configs need distinct names, got {names}.", ConfigError)
    if workers < 1:
        log_and_raise_error(f"workers must be at least 1, got {workers}.", ConfigError)
    output_dir = _prepare_dir(Path(output_dir))
    members = [(config.with_seed(seed), output_dir / config.name / f"seed_{seed}") for config in configs for seed in seeds]
    log("Starting sweep.", configs=names, seeds=list(seeds), workers=workers)

    if workers == 1:
        results = [run_single(config, path) for config, path in members]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_single, *zip(*members)))

    rows = [
        (result.config.name, result.config.dataset.seed, result.report)
        for result in results
        if result.report is not None
    ]
    if not rows:
        return SweepResult(results=tuple(results))
    summary = summarize_reports(rows)
    files = export_summary(summary, output_dir / SUMMARY_FILE)
    return SweepResult(results=tuple(results), summary=summary, files=files)


__all__ = ["RunResult", "SweepResult", "parse_seeds", "run_single", "run_sweep"]

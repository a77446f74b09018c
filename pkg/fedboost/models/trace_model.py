"""Simulation trace data models."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional, Tuple

from ..boostcore import Ensemble

if TYPE_CHECKING:
    from ..fedsim import SimEvent

TRACE_COLUMNS = ("agg", "vtime", "uploads", "broadcasts", "bytes", "val_err", "train_err", "interval")


@dataclass(frozen=True)
class MetricsRecord:
    """Counters and errors right after one aggregation (index 0 is the initial evaluation)."""

    aggregation_index: int
    virtual_time: float
    cumulative_uploads: int
    cumulative_broadcasts: int
    cumulative_bytes: int
    validation_error: float
    training_error: float
    current_interval: int

    def as_row(self) -> tuple:
        """Values in TRACE_COLUMNS order."""
        return (
            self.aggregation_index,
            self.virtual_time,
            self.cumulative_uploads,
            self.cumulative_broadcasts,
            self.cumulative_bytes,
            self.validation_error,
            self.training_error,
            self.current_interval,
        )


class RoundOutcome(str, Enum):
    TRAINED = "trained"
    DISCARDED = "discarded"
    DROPPED = "dropped"


@dataclass(frozen=True)
class LocalRound:
    """One client boosting round; ``raw_error`` is the unclamped weighted error."""

    time: float
    client_id: int
    round_index: int
    outcome: RoundOutcome
    raw_error: Optional[float] = None
    alpha: Optional[float] = None


class StopReason(str, Enum):
    CONVERGED = "converged"
    MAX_AGGREGATIONS = "max_aggregations"
    MAX_VIRTUAL_TIME = "max_virtual_time"
    IDLE = "idle"


@dataclass(frozen=True)
class SimTrace:
    """Everything a simulation run produced. Immutable once returned."""

    mode: str
    records: Tuple[MetricsRecord, ...]
    ensemble: Ensemble = Ensemble()
    events: Tuple["SimEvent", ...] = ()
    local_rounds: Tuple[LocalRound, ...] = ()
    stop_reason: StopReason = StopReason.IDLE
    converged_at: Optional[int] = None

    @property
    def aggregations(self) -> int:
        return self.records[-1].aggregation_index if self.records else 0

    def local_rounds_until(self, time: float) -> int:
        """Local rounds (dropped ones included) that finished by virtual time ``time``."""
        return sum(1 for local_round in self.local_rounds if local_round.time <= time)

    def record_at(self, aggregation_index: int) -> MetricsRecord:
        """The record for an aggregation index."""
        for record in self.records:
            if record.aggregation_index == aggregation_index:
                return record
        raise KeyError(f"No record for aggregation {aggregation_index}")

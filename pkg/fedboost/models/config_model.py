"""Config model."""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Extra, Field, confloat, conint, constr, root_validator, validator

from ..datagen import class_counts, split_counts


class Mode(str, Enum):
    """Federation modes."""

    SYNCHRONOUS = "synchronous"
    ASYNC_FIXED = "async_fixed"
    ASYNC_ADAPTIVE = "async_adaptive"


class StrictModel(BaseModel):
    """Immutable model that rejects unknown keys."""

    class Config:
        extra = Extra.forbid
        allow_mutation = False
        allow_population_by_field_name = True


def _ordered_range(value: Tuple[float, float], name: str) -> Tuple[float, float]:
    low, high = value
    if low > high:
        raise ValueError(f"{name} range must be [low, high] with low <= high, got {list(value)}")
    return value


class SchedulerParams(StrictModel):
    """Adaptive interval controller settings.

    ``step_up``/``step_down`` are the interval growth and back-off steps;
    thresholds compare the change in ensemble error between evaluations.
    """

    theta1: float = 0.0
    theta2: float = 0.005
    step_up: conint(ge=1) = 1  # type: ignore
    step_down: conint(ge=1) = 2  # type: ignore
    i_min: conint(ge=1) = 1  # type: ignore
    i_max: conint(ge=1) = 16  # type: ignore

    @root_validator(skip_on_failure=True)
    def check_ordering(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values["theta1"] > values["theta2"]:
            raise ValueError(f"theta1 ({values['theta1']}) must not exceed theta2 ({values['theta2']})")
        if values["i_min"] > values["i_max"]:
            raise ValueError(f"i_min ({values['i_min']}) must not exceed i_max ({values['i_max']})")
        return values

    def disabled(self) -> SchedulerParams:
        """Same bounds with thresholds that never fire: a fixed interval."""
        return self.copy(update={"theta1": -math.inf, "theta2": math.inf})


class DatasetSpec(StrictModel):
    """Synthetic dataset settings."""

    n: conint(ge=2) = 2000  # type: ignore
    dimension: conint(ge=1) = 2  # type: ignore
    sigma: confloat(gt=0) = 0.8  # type: ignore
    imbalance_ratio: confloat(gt=0) = 1.0  # type: ignore
    validation_fraction: confloat(gt=0, lt=1) = 0.2  # type: ignore
    seed: int = 42

    @property
    def positive_fraction(self) -> float:
        """Share of label +1; an imbalance ratio r means 1 positive per r negatives."""
        return 1.0 / (1.0 + self.imbalance_ratio)

    @root_validator(skip_on_failure=True)
    def check_counts(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        class_counts(values["n"], 1.0 / (1.0 + values["imbalance_ratio"]))
        return values


class PartitionSpec(StrictModel):
    """Client partition settings."""

    clients: conint(ge=1) = 5  # type: ignore
    concentration: confloat(gt=0) = 0.5  # type: ignore
    seed: int = 42


class HeterogeneitySpec(StrictModel):
    """Per-client resource ranges; each client draws one value per range at setup."""

    compute_time: Tuple[confloat(gt=0), confloat(gt=0)] = (0.5, 2.0)  # type: ignore
    link_latency: Tuple[confloat(ge=0), confloat(ge=0)] = (0.1, 1.0)  # type: ignore
    dropout: Tuple[confloat(ge=0, lt=1), confloat(ge=0, lt=1)] = (0.1, 0.1)  # type: ignore
    burst_persistence: Optional[confloat(ge=0, lt=1)] = None  # type: ignore
    seed: int = 42

    @validator("compute_time", "link_latency", "dropout")
    def check_range(cls, value: Tuple[float, float], field) -> Tuple[float, float]:  # type: ignore
        return _ordered_range(value, field.name)


class AlgorithmSpec(StrictModel):
    """Boosting and scheduling parameters."""

    decay_lambda: confloat(ge=0) = Field(0.1, alias="lambda")  # type: ignore
    eps_floor: confloat(gt=0, lt=0.5) = 1e-6  # type: ignore
    initial_interval: conint(ge=1) = 1  # type: ignore
    scheduler: SchedulerParams = SchedulerParams()


class StopSpec(StrictModel):
    """When a simulation ends."""

    max_aggregations: conint(ge=0) = 500  # type: ignore
    max_virtual_time: confloat(gt=0) = 3600.0  # type: ignore
    on_convergence: bool = True


class ConvergenceSpec(StrictModel):
    """Convergence detection parameters."""

    target_error: confloat(ge=0, le=1) = 0.10  # type: ignore
    plateau_tol: confloat(ge=0) = 1e-4  # type: ignore
    window: conint(ge=1) = 5  # type: ignore


class ExperimentConfig(StrictModel):
    """Complete experiment config data model."""

    name: constr(min_length=1) = "custom"  # type: ignore
    mode: Mode = Mode.ASYNC_ADAPTIVE
    dataset: DatasetSpec = DatasetSpec()
    partition: PartitionSpec = PartitionSpec()
    heterogeneity: HeterogeneitySpec = HeterogeneitySpec()
    algorithm: AlgorithmSpec = AlgorithmSpec()
    stop: StopSpec = StopSpec()
    convergence: ConvergenceSpec = ConvergenceSpec()

    @root_validator(skip_on_failure=True)
    def check_clients_fit(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        dataset: DatasetSpec = values["dataset"]
        clients = values["partition"].clients
        training_counts = [
            split_counts(count, dataset.validation_fraction)[0]
            for count in class_counts(dataset.n, dataset.positive_fraction)
        ]
        if clients > min(training_counts):
            raise ValueError(
                f"partition.clients ({clients}) exceeds the smallest per-label training count "
                f"({min(training_counts)}); every client needs both labels"
            )
        return values

    @property
    def scheduler_params(self) -> SchedulerParams:
        """Controller settings for this mode; async_fixed never adjusts the interval."""
        if self.mode == Mode.ASYNC_FIXED:
            return self.algorithm.scheduler.disabled()
        return self.algorithm.scheduler

    def with_mode(self, mode: Mode) -> ExperimentConfig:
        return self.copy(update={"mode": Mode(mode)})

    def with_seed(self, seed: int) -> ExperimentConfig:
        """Copy with the dataset, partition and heterogeneity seeds all set to ``seed``."""
        return self.copy(
            update={
                "dataset": self.dataset.copy(update={"seed": seed}),
                "partition": self.partition.copy(update={"seed": seed}),
                "heterogeneity": self.heterogeneity.copy(update={"seed": seed}),
            }
        )


def describe_config_keys(model: type = ExperimentConfig, prefix: str = "") -> List[Tuple[str, Any]]:
    """
    List every config key with its default, in declaration order.

    Args:
        model: pydantic model class to describe.
        prefix: dotted prefix of the enclosing section.

    Returns:
        (dotted key, default) pairs; nested sections are expanded.
    """
    keys: List[Tuple[str, Any]] = []
    for model_field in model.__fields__.values():
        key = f"{prefix}{model_field.alias}"
        default = model_field.default
        if isinstance(default, BaseModel):
            keys.extend(describe_config_keys(type(default), prefix=f"{key}."))
        else:
            keys.append((key, default.value if isinstance(default, Enum) else default))
    return keys

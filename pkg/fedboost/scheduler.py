"""Adaptive synchronization interval controller.

The server keeps one interval, counted in local boosting rounds between
uploads, and adjusts it after every evaluation of the global ensemble error:

* the error dropped by more than ``theta1`` (change < theta1): grow by ``step_up``;
* the error rose by more than ``theta2`` (change > theta2): shrink by ``step_down``, never below 1;
* otherwise: keep it.

The result is then clamped to ``[i_min, i_max]``. ``step_up``/``step_down``
are the interval step sizes, named apart from the learner weight alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .exceptions import InvalidArgumentError
from .models.config_model import SchedulerParams
from .utils.logger import log_and_raise_error


def clamp_interval(interval: int, params: SchedulerParams) -> int:
    return min(max(interval, params.i_min), params.i_max)


@dataclass(frozen=True)
class SchedulerState:
    """Current interval and the error seen at the previous evaluation."""

    interval: int
    last_error: Optional[float] = None

    @classmethod
    def initial(cls, interval: int, params: SchedulerParams) -> SchedulerState:
        """Starting state, with ``interval`` clamped into the allowed bounds."""
        return cls(interval=clamp_interval(interval, params), last_error=None)


def next_interval(state: SchedulerState, params: SchedulerParams, epsilon_t: float) -> SchedulerState:
    """
    Apply one step of the adaptive interval rule.

    The first evaluation only records the error.

    Args:
        state: current controller state.
        params: thresholds, steps and bounds.
        epsilon_t: the new global ensemble error, in [0, 1].

    Returns:
        The next controller state.
    """
    if not 0.0 <= epsilon_t <= 1.0:
        log_and_raise_error(f"Ensemble error must be in [0, 1], got {epsilon_t}.", InvalidArgumentError)
    if state.last_error is None:
        return SchedulerState(interval=state.interval, last_error=epsilon_t)

    change = epsilon_t - state.last_error
    interval = state.interval
    if change < params.theta1:
        interval += params.step_up
    elif change > params.theta2:
        interval = max(1, interval - params.step_down)
    return SchedulerState(interval=clamp_interval(interval, params), last_error=epsilon_t)

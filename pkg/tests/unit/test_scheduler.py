import math
import unittest

import numpy as np
from pydantic import ValidationError

from fedboost.exceptions import InvalidArgumentError
from fedboost.models.config_model import SchedulerParams
from fedboost.scheduler import SchedulerState, next_interval


class TestNextInterval(unittest.TestCase):
    def setUp(self):
        self.params = SchedulerParams(theta1=0.0, theta2=0.005, step_up=1, step_down=2, i_min=1, i_max=16)
        self.state = SchedulerState(interval=4, last_error=0.20)

    def test_improvement_grows(self):
        self.assertEqual(next_interval(self.state, self.params, 0.19), SchedulerState(5, 0.19))

    def test_regression_shrinks(self):
        self.assertEqual(next_interval(self.state, self.params, 0.21), SchedulerState(2, 0.21))

    def test_stable_keeps(self):
        self.assertEqual(next_interval(self.state, self.params, 0.203).interval, 4)

    def test_clamped_at_maximum(self):
        state = SchedulerState(interval=16, last_error=0.20)
        self.assertEqual(next_interval(state, self.params, 0.10).interval, 16)

    def test_first_evaluation_only_records(self):
        state = next_interval(SchedulerState(interval=3), self.params, 0.4)
        self.assertEqual(state, SchedulerState(3, 0.4))

    def test_floor_applies_before_clamp(self):
        params = SchedulerParams(theta1=0.0, theta2=0.005, step_up=1, step_down=5, i_min=3, i_max=8)
        state = next_interval(SchedulerState(interval=4, last_error=0.1), params, 0.3)
        # max(1, 4 - 5) = 1, then raised to i_min
        self.assertEqual(state.interval, 3)

    def test_rejects_error_outside_unit_interval(self):
        with self.assertRaises(InvalidArgumentError):
            next_interval(self.state, self.params, 1.5)

    def test_initial_clamps(self):
        self.assertEqual(SchedulerState.initial(40, self.params).interval, 16)
        self.assertIsNone(SchedulerState.initial(4, self.params).last_error)

    def test_fuzz_stays_in_bounds_with_exact_branches(self):
        rng = np.random.default_rng(4)
        params = SchedulerParams(theta1=-0.002, theta2=0.004, step_up=2, step_down=3, i_min=2, i_max=11)
        state = SchedulerState.initial(5, params)
        for error in rng.random(1000).tolist():
            new_state = next_interval(state, params, error)
            self.assertGreaterEqual(new_state.interval, params.i_min)
            self.assertLessEqual(new_state.interval, params.i_max)
            if state.last_error is None:
                expected = state.interval
            elif error - state.last_error < params.theta1:
                expected = state.interval + params.step_up
            elif error - state.last_error > params.theta2:
                expected = max(1, state.interval - params.step_down)
            else:
                expected = state.interval
            self.assertEqual(new_state.interval, min(max(expected, params.i_min), params.i_max))
            self.assertEqual(new_state.last_error, error)
            state = new_state

    def test_disabled_thresholds_keep_interval(self):
        params = self.params.disabled()
        self.assertEqual(params.theta1, -math.inf)
        self.assertEqual(params.theta2, math.inf)
        state = SchedulerState.initial(3, params)
        for error in np.random.default_rng(1).random(200).tolist():
            state = next_interval(state, params, error)
            self.assertEqual(state.interval, 3)


class TestSchedulerParams(unittest.TestCase):
    def test_threshold_ordering(self):
        with self.assertRaisesRegex(ValidationError, "theta1"):
            SchedulerParams(theta1=0.01, theta2=0.0)

    def test_bounds_ordering(self):
        with self.assertRaisesRegex(ValidationError, "i_min"):
            SchedulerParams(i_min=5, i_max=4)
        with self.assertRaises(ValidationError):
            SchedulerParams(i_min=0)


if __name__ == "__main__":
    unittest.main()

"""Weighted decision stumps, the weak learners of the boosted ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .datagen import Dataset
from .exceptions import DimensionError, InvalidArgumentError
from .utils.logger import log_and_raise_error

SUM_TOLERANCE = 1e-9
# Candidates whose running-sum error is this close to the best are re-scored exactly.
SHORTLIST_TOLERANCE = 1e-9
SENTINEL_OFFSET = 1.0


@dataclass(frozen=True)
class Stump:
    """Predicts ``polarity`` when ``features[feature_index] > threshold``, else ``-polarity``."""

    feature_index: int
    threshold: float
    polarity: int


@dataclass(frozen=True, eq=False)
class DistributionVector:
    """Per-sample weights D(i): nonnegative and summing to 1."""

    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.shape[0] == 0:
            log_and_raise_error("Distribution weights must be a nonempty vector.", InvalidArgumentError)
        if not np.all(np.isfinite(weights)) or np.any(weights < 0.0):
            log_and_raise_error("Distribution weights must be finite and nonnegative.", InvalidArgumentError)
        total = math.fsum(weights)
        if abs(total - 1.0) > SUM_TOLERANCE:
            log_and_raise_error(f"Distribution weights sum to {total!r}, not 1.", InvalidArgumentError)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, size: int) -> DistributionVector:
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DistributionVector):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def check_over(self, dataset: Dataset) -> None:
        """Raise unless this distribution indexes exactly the samples of ``dataset``."""
        if len(self) != len(dataset):
            log_and_raise_error(
                f"Distribution has {len(self)} weights for a dataset of {len(dataset)} samples.",
                InvalidArgumentError,
            )


def predict(stump: Stump, features: Sequence[float]) -> int:
    """
    Evaluate a stump on one feature vector.

    Args:
        stump: the stump.
        features: feature vector; must be longer than stump.feature_index.

    Returns:
        +1 or -1.

    Raises:
        DimensionError: The vector is too short.
    """
    if len(features) <= stump.feature_index:
        log_and_raise_error(
            f"Stump reads feature {stump.feature_index} of a {len(features)}-feature vector.", DimensionError
        )
    return stump.polarity if features[stump.feature_index] > stump.threshold else -stump.polarity


def predict_batch(stump: Stump, features: np.ndarray) -> np.ndarray:
    """Evaluate a stump on every row of a feature matrix."""
    if features.ndim != 2 or features.shape[1] <= stump.feature_index:
        log_and_raise_error(
            f"Stump reads feature {stump.feature_index} of a matrix shaped {features.shape}.", DimensionError
        )
    return np.where(features[:, stump.feature_index] > stump.threshold, stump.polarity, -stump.polarity)


def weighted_error(stump: Stump, dataset: Dataset, dist: DistributionVector) -> float:
    """
    Weighted 0-1 error of a stump.

    The sum is exactly rounded (``math.fsum``), so the result does not depend
    on sample order.

    Args:
        stump: the stump.
        dataset: labeled samples.
        dist: weights over ``dataset``.

    Returns:
        Sum of the weights of misclassified samples, in [0, 1].
    """
    dist.check_over(dataset)
    mistakes = predict_batch(stump, dataset.features) != dataset.labels
    return min(1.0, math.fsum(dist.weights[mistakes]))


def _split_errors(column: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Thresholds and running-sum errors of both polarities for one feature."""
    order = np.argsort(column, kind="stable")
    values = column[order]
    positive = np.where(labels[order] == 1, weights[order], 0.0)
    negative = np.where(labels[order] == -1, weights[order], 0.0)
    cum_positive = np.concatenate(([0.0], np.cumsum(positive)))
    cum_negative = np.concatenate(([0.0], np.cumsum(negative)))

    # a split at k sends sorted samples [0, k) below the threshold
    interior = np.flatnonzero(values[1:] > values[:-1]) + 1
    splits = np.concatenate(([0], interior, [values.shape[0]]))
    thresholds = np.empty(splits.shape[0])
    thresholds[0] = values[0] - SENTINEL_OFFSET
    thresholds[-1] = values[-1] + SENTINEL_OFFSET
    thresholds[1:-1] = (values[interior - 1] + values[interior]) / 2.0

    error_plus = cum_positive[splits] + (cum_negative[-1] - cum_negative[splits])
    error_minus = cum_negative[splits] + (cum_positive[-1] - cum_positive[splits])
    return thresholds, error_plus, error_minus


def train_stump(dataset: Dataset, dist: DistributionVector) -> Tuple[Stump, float]:
    """
    Find the stump with the lowest weighted error.

    Candidates are every feature, every midpoint between consecutive distinct
    sorted values plus one threshold below the minimum and one above the
    maximum, and both polarities. Running sums locate the near-best candidates,
    which are then re-scored with ``weighted_error``; ties go to the lower
    feature index, then the lower threshold, then polarity +1.

    Args:
        dataset: labeled samples.
        dist: weights over ``dataset``.

    Returns:
        The best stump and its weighted error.
    """
    dist.check_over(dataset)
    per_feature = [
        _split_errors(dataset.features[:, j], dataset.labels, dist.weights) for j in range(dataset.dimension)
    ]
    best_estimate = min(min(plus.min(), minus.min()) for _, plus, minus in per_feature)
    cutoff = best_estimate + SHORTLIST_TOLERANCE

    shortlist: List[Stump] = []
    for j, (thresholds, plus, minus) in enumerate(per_feature):
        for i in np.flatnonzero((plus <= cutoff) | (minus <= cutoff)):
            if plus[i] <= cutoff:
                shortlist.append(Stump(feature_index=j, threshold=float(thresholds[i]), polarity=1))
            if minus[i] <= cutoff:
                shortlist.append(Stump(feature_index=j, threshold=float(thresholds[i]), polarity=-1))

    scored = [(weighted_error(stump, dataset, dist), stump) for stump in shortlist]
    error, stump = min(
        scored, key=lambda item: (item[0], item[1].feature_index, item[1].threshold, -item[1].polarity)
    )
    return stump, error

"""Boosting mathematics: learner weights, staleness decay, distribution updates and the ensemble.

Staleness ``tau`` is counted in server aggregations: the aggregation count
at the moment a learner is applied, minus one, minus the aggregation count
the client had seen when it trained the learner. Clients update their own
sample distribution with the undecayed weight; the decay only changes the
learner's vote in the global ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Tuple

import numpy as np

from .datagen import Dataset
from .exceptions import DimensionError, InvalidArgumentError, NumericError
from .stump import DistributionVector, Stump, predict, predict_batch
from .utils.logger import log_and_raise_error

DEFAULT_EPS_FLOOR = 1e-6


def clamp_error(epsilon: float, eps_floor: float = DEFAULT_EPS_FLOOR) -> float:
    """Clamp a weighted error into [eps_floor, 1 - eps_floor]."""
    if not 0.0 < eps_floor < 0.5:
        log_and_raise_error(f"eps_floor must be in (0, 0.5), got {eps_floor}.", InvalidArgumentError)
    if not 0.0 <= epsilon <= 1.0:
        log_and_raise_error(f"Weighted error must be in [0, 1], got {epsilon}.", InvalidArgumentError)
    return min(max(epsilon, eps_floor), 1.0 - eps_floor)


def learner_weight(epsilon: float, eps_floor: float = DEFAULT_EPS_FLOOR) -> float:
    """
    AdaBoost weight of a weak learner, 1/2 ln((1 - eps) / eps).

    Args:
        epsilon: weighted error in [0, 1]; clamped to [eps_floor, 1 - eps_floor] first.
        eps_floor: clamping floor in (0, 0.5).

    Returns:
        The learner weight alpha. Zero at epsilon = 0.5, negative above it.
    """
    clamped = clamp_error(epsilon, eps_floor)
    return 0.5 * math.log((1.0 - clamped) / clamped)


def decayed_weight(alpha: float, tau: int, decay_lambda: float) -> float:
    """Staleness-compensated weight alpha * exp(-lambda * tau)."""
    if tau < 0 or decay_lambda < 0.0:
        log_and_raise_error(
            f"Staleness and decay must be nonnegative, got tau={tau}, lambda={decay_lambda}.", InvalidArgumentError
        )
    return alpha * math.exp(-decay_lambda * tau)


class DistributionUpdate(NamedTuple):
    """A reweighted distribution and the normalizer Z_t that produced it."""

    dist: DistributionVector
    normalizer: float


def update_distribution(
    dist: DistributionVector, stump: Stump, alpha_eff: float, dataset: Dataset
) -> DistributionUpdate:
    """
    Reweight samples: D'(i) = D(i) exp(-alpha_eff y_i h(x_i)) / Z.

    Exponents are shifted by their maximum before exponentiation; the
    reported normalizer is scaled back, so it may be ``inf`` for very large
    weights even though the distribution itself is fine.

    Args:
        dist: current distribution over ``dataset``.
        stump: the learner h.
        alpha_eff: weight used for the update.
        dataset: labeled samples.

    Returns:
        The new distribution and Z.

    Raises:
        NumericError: The shifted normalizer is zero or not finite.
    """
    dist.check_over(dataset)
    if alpha_eff == 0.0:
        return DistributionUpdate(dist=dist, normalizer=1.0)
    exponents = -alpha_eff * dataset.labels * predict_batch(stump, dataset.features)
    shift = float(exponents.max())
    unnormalized = dist.weights * np.exp(exponents - shift)
    total = math.fsum(unnormalized)
    if not (total > 0.0 and math.isfinite(total)):
        log_and_raise_error(f"Distribution normalizer is {total!r} for alpha={alpha_eff}.", NumericError)
    try:
        normalizer = total * math.exp(shift)
    except OverflowError:
        normalizer = math.inf
    return DistributionUpdate(dist=DistributionVector(unnormalized / total), normalizer=normalizer)


@dataclass(frozen=True)
class BufferedLearner:
    """A trained weak learner waiting in a client buffer, with its provenance."""

    stump: Stump
    epsilon: float
    alpha: float
    client_id: int
    snapshot_round: int
    local_seq: int

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            log_and_raise_error(f"Buffered error must be inside (0, 1), got {self.epsilon}.", InvalidArgumentError)


@dataclass(frozen=True)
class EnsembleMember:
    learner: BufferedLearner
    tau: int
    effective_weight: float


@dataclass(frozen=True)
class Ensemble:
    """Weighted learners in aggregation order (then client_id, then local_seq)."""

    members: Tuple[EnsembleMember, ...] = ()
    decay_lambda: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def extend(self, members: Iterable[EnsembleMember]) -> Ensemble:
        """A new ensemble with ``members`` appended."""
        return Ensemble(members=self.members + tuple(members), decay_lambda=self.decay_lambda)

    def member_for(self, learner: BufferedLearner, tau: int) -> EnsembleMember:
        """Wrap a learner with its decayed weight under this ensemble's lambda."""
        tau = max(0, tau)
        return EnsembleMember(
            learner=learner, tau=tau, effective_weight=decayed_weight(learner.alpha, tau, self.decay_lambda)
        )


def accumulate_margin(margin: np.ndarray, member: EnsembleMember, features: np.ndarray) -> np.ndarray:
    """Add one member's weighted vote to running margins."""
    return margin + member.effective_weight * predict_batch(member.learner.stump, features)


def ensemble_margins(ensemble: Ensemble, features: np.ndarray) -> np.ndarray:
    """Sum of weighted votes for every row, accumulated in member order."""
    margin = np.zeros(features.shape[0])
    for member in ensemble.members:
        margin = accumulate_margin(margin, member, features)
    return margin


def sign(margin: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1."""
    return np.where(margin >= 0.0, 1, -1)


def ensemble_predict(ensemble: Ensemble, features: Sequence[float]) -> int:
    """
    H(x) = sign(sum of effective_weight * h(x)), with sign(0) = +1.

    Args:
        ensemble: the ensemble; may be empty.
        features: one feature vector.

    Returns:
        +1 or -1.

    Raises:
        DimensionError: A member reads a feature the vector does not have.
    """
    margin = 0.0
    for member in ensemble.members:
        margin += member.effective_weight * predict(member.learner.stump, features)
    return 1 if margin >= 0.0 else -1


def ensemble_error(ensemble: Ensemble, dataset: Dataset) -> float:
    """Unweighted fraction of samples the ensemble misclassifies."""
    if ensemble.members and max(m.learner.stump.feature_index for m in ensemble.members) >= dataset.dimension:
        log_and_raise_error("Ensemble reads features beyond the dataset dimension.", DimensionError)
    predictions = sign(ensemble_margins(ensemble, dataset.features))
    return float(np.count_nonzero(predictions != dataset.labels)) / len(dataset)

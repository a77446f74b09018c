import math
import unittest

import numpy as np

from fedboost.boostcore import (
    BufferedLearner,
    Ensemble,
    EnsembleMember,
    decayed_weight,
    ensemble_error,
    ensemble_margins,
    ensemble_predict,
    learner_weight,
    update_distribution,
)
from fedboost.datagen import Dataset
from fedboost.exceptions import DimensionError, InvalidArgumentError
from fedboost.stump import DistributionVector, Stump, predict, train_stump, weighted_error


def member(stump: Stump, weight: float) -> EnsembleMember:
    learner = BufferedLearner(stump=stump, epsilon=0.25, alpha=weight, client_id=0, snapshot_round=0, local_seq=0)
    return EnsembleMember(learner=learner, tau=0, effective_weight=weight)


class TestLearnerWeight(unittest.TestCase):
    def test_closed_form(self):
        self.assertEqual(learner_weight(0.5, 1e-6), 0.0)
        self.assertAlmostEqual(learner_weight(0.1, 1e-6), 0.5 * math.log(9.0), places=12)
        self.assertAlmostEqual(learner_weight(0.1, 1e-6), 1.0986123, places=7)

    def test_zero_error_is_clamped(self):
        self.assertAlmostEqual(learner_weight(0.0, 1e-6), 0.5 * math.log((1 - 1e-6) / 1e-6), places=12)
        self.assertAlmostEqual(learner_weight(0.0, 1e-6), 6.9077548, places=7)
        self.assertAlmostEqual(learner_weight(1.0, 1e-6), -6.9077548, places=7)

    def test_rejects_bad_floor(self):
        for floor in (0.0, 0.5, -0.1, 0.7):
            with self.subTest(floor=floor), self.assertRaises(InvalidArgumentError):
                learner_weight(0.2, floor)


class TestDecayedWeight(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(decayed_weight(1.0, 0, 0.1), 1.0)
        self.assertAlmostEqual(decayed_weight(1.0, 5, 0.1), 0.6065307, places=7)
        self.assertEqual(decayed_weight(0.0, 7, 0.3), 0.0)

    def test_grid_matches_closed_form(self):
        for decay_lambda in (0.0, 0.05, 0.1, 0.5):
            for tau in range(21):
                for alpha in (0.0, 0.1, 1.0, 3.0):
                    expected = alpha * math.exp(-decay_lambda * tau)
                    actual = decayed_weight(alpha, tau, decay_lambda)
                    if expected == 0.0:
                        self.assertEqual(actual, 0.0)
                    else:
                        self.assertLessEqual(abs(actual - expected) / abs(expected), 1e-12)

    def test_strictly_decreasing_in_staleness(self):
        for decay_lambda in (0.05, 0.1, 0.5):
            for alpha in (0.1, 1.0, 3.0):
                weights = [decayed_weight(alpha, tau, decay_lambda) for tau in range(21)]
                self.assertTrue(all(a > b for a, b in zip(weights, weights[1:])))

    def test_identity_without_decay(self):
        for tau in range(21):
            self.assertEqual(decayed_weight(2.5, tau, 0.0), 2.5)

    def test_rejects_negative(self):
        with self.assertRaises(InvalidArgumentError):
            decayed_weight(1.0, -1, 0.1)
        with self.assertRaises(InvalidArgumentError):
            decayed_weight(1.0, 1, -0.1)


class TestUpdateDistribution(unittest.TestCase):
    def setUp(self):
        self.pair = Dataset(features=np.array([[-1.0], [1.0]]), labels=np.array([-1, 1]))

    def test_zero_weight_is_identity(self):
        dist = DistributionVector(np.array([0.3, 0.7]))
        update = update_distribution(dist, Stump(0, 0.0, 1), 0.0, self.pair)
        self.assertEqual(update.dist, dist)
        self.assertEqual(update.normalizer, 1.0)

    def test_all_correct_stays_uniform(self):
        update = update_distribution(DistributionVector.uniform(2), Stump(0, 0.0, 1), 1.0, self.pair)
        self.assertTrue(np.allclose(update.dist.weights, [0.5, 0.5], rtol=0, atol=1e-15))
        self.assertAlmostEqual(update.normalizer, math.exp(-1.0), places=15)

    def test_hand_evaluated(self):
        # the stump is right on sample 0 only
        dataset = Dataset(features=np.array([[-1.0], [1.0]]), labels=np.array([-1, -1]))
        update = update_distribution(DistributionVector.uniform(2), Stump(0, 0.0, 1), 1.0, dataset)
        self.assertAlmostEqual(update.dist.weights[0], 0.1192029, places=7)
        self.assertAlmostEqual(update.dist.weights[1], 0.8807971, places=7)
        expected_z = 0.5 * math.exp(-1.0) + 0.5 * math.exp(1.0)
        self.assertAlmostEqual(update.normalizer, expected_z, places=12)

    def test_normalization_fuzz(self):
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            n = int(rng.integers(1, 20))
            features = rng.normal(size=(n, 2))
            labels = np.where(rng.random(n) < 0.5, 1, -1)
            weights = rng.random(n) + 1e-12
            dist = DistributionVector(weights / weights.sum())
            stump = Stump(int(rng.integers(0, 2)), float(rng.normal()), int(rng.choice([-1, 1])))
            alpha = float(rng.uniform(-10.0, 10.0))
            output = update_distribution(dist, stump, alpha, Dataset(features, labels)).dist.weights
            self.assertTrue(np.all(output >= 0.0))
            self.assertLessEqual(abs(math.fsum(output) - 1.0), 1e-9)

    def test_large_weight_does_not_overflow(self):
        dataset = Dataset(features=np.array([[-1.0], [1.0]]), labels=np.array([-1, -1]))
        update = update_distribution(DistributionVector.uniform(2), Stump(0, 0.0, 1), 800.0, dataset)
        self.assertEqual(update.dist.weights.tolist(), [0.0, 1.0])
        self.assertEqual(update.normalizer, math.inf)

    def test_reweighted_stump_has_half_error(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            dataset = Dataset(rng.normal(size=(40, 2)), np.where(rng.random(40) < 0.5, 1, -1))
            weights = rng.random(40)
            dist = DistributionVector(weights / weights.sum())
            stump, error = train_stump(dataset, dist)
            if not 0.0 < error < 0.5:
                continue
            updated = update_distribution(dist, stump, learner_weight(error, 1e-6), dataset).dist
            self.assertAlmostEqual(weighted_error(stump, dataset, updated), 0.5, delta=1e-9)


class TestEnsemble(unittest.TestCase):
    def test_empty_ensemble_predicts_positive(self):
        self.assertEqual(ensemble_predict(Ensemble(), (3.0, -2.0)), 1)

    def test_single_member(self):
        ensemble = Ensemble(members=(member(Stump(0, 0.0, 1), 0.7),))
        self.assertEqual(ensemble_predict(ensemble, (-1.0,)), -1)

    def test_hand_summed_margin(self):
        ensemble = Ensemble(
            members=(member(Stump(0, 0.0, 1), 1.0), member(Stump(0, 0.0, -1), 0.6), member(Stump(0, 5.0, 1), 0.6))
        )
        # votes +1, -1, -1: margin -0.2
        self.assertEqual(ensemble_predict(ensemble, (1.0,)), -1)
        self.assertAlmostEqual(ensemble_margins(ensemble, np.array([[1.0]]))[0], -0.2, places=12)

    def test_dimension_mismatch(self):
        ensemble = Ensemble(members=(member(Stump(3, 0.0, 1), 1.0),))
        with self.assertRaises(DimensionError):
            ensemble_predict(ensemble, (1.0, 2.0))
        with self.assertRaises(DimensionError):
            ensemble_error(ensemble, Dataset(np.zeros((2, 2)), np.array([1, -1])))

    def test_empty_ensemble_error_on_balanced_data(self):
        dataset = Dataset(np.arange(10.0).reshape(-1, 1), np.array([1, -1] * 5))
        self.assertEqual(ensemble_error(Ensemble(), dataset), 0.5)

    def test_perfect_stump(self):
        dataset = Dataset(features=np.array([[-1.0], [1.0]]), labels=np.array([-1, 1]))
        self.assertEqual(ensemble_error(Ensemble(members=(member(Stump(0, 0.0, 1), 1.0),)), dataset), 0.0)

    def test_error_matches_per_sample_loop(self):
        rng = np.random.default_rng(8)
        dataset = Dataset(rng.normal(size=(10, 2)), np.where(rng.random(10) < 0.5, 1, -1))
        ensemble = Ensemble(
            members=(member(Stump(0, 0.1, 1), 0.9), member(Stump(1, -0.3, -1), 0.5), member(Stump(0, 0.8, -1), 0.4))
        )
        wrong = 0
        for row, label in zip(dataset.features.tolist(), dataset.labels.tolist()):
            total = sum(m.effective_weight * predict(m.learner.stump, row) for m in ensemble.members)
            wrong += (1 if total >= 0 else -1) != label
        self.assertEqual(ensemble_error(ensemble, dataset), wrong / 10)

    def test_scaling_weights_keeps_predictions(self):
        rng = np.random.default_rng(21)
        features = rng.normal(size=(200, 2))
        stumps = [Stump(int(rng.integers(0, 2)), float(rng.normal()), int(rng.choice([-1, 1]))) for _ in range(7)]
        weights = rng.random(7)
        base = Ensemble(members=tuple(member(s, w) for s, w in zip(stumps, weights)))
        scaled = Ensemble(members=tuple(member(s, 4.0 * w) for s, w in zip(stumps, weights)))
        for row in features.tolist():
            self.assertEqual(ensemble_predict(base, row), ensemble_predict(scaled, row))

    def test_member_for_floors_staleness(self):
        learner = BufferedLearner(Stump(0, 0.0, 1), 0.2, learner_weight(0.2), 1, 5, 0)
        ensemble = Ensemble(decay_lambda=0.1)
        self.assertEqual(ensemble.member_for(learner, -3).tau, 0)
        self.assertAlmostEqual(ensemble.member_for(learner, 4).effective_weight, learner.alpha * math.exp(-0.4), places=14)

    def test_buffered_error_must_be_open_interval(self):
        with self.assertRaises(InvalidArgumentError):
            BufferedLearner(Stump(0, 0.0, 1), 0.0, 1.0, 0, 0, 0)


if __name__ == "__main__":
    unittest.main()

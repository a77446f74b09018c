import tempfile
import unittest
from collections import Counter
from pathlib import Path

import numpy as np

from fedboost.datagen import (
    Dataset,
    Sample,
    class_counts,
    concat_datasets,
    generate_gaussians,
    partition_dirichlet,
    read_csv,
    split_validation,
    write_csv,
)
from fedboost.exceptions import DataFormatError, InvalidArgumentError, PartitionError


def sample_multiset(dataset: Dataset) -> Counter:
    return Counter((tuple(row), int(label)) for row, label in zip(dataset.features.tolist(), dataset.labels))


class TestGenerateGaussians(unittest.TestCase):
    def test_class_counts_and_order(self):
        dataset = generate_gaussians(2000, 2, 0.8, 42)
        self.assertEqual(len(dataset), 2000)
        self.assertEqual(dataset.dimension, 2)
        self.assertEqual(dataset.count(1), 1000)
        self.assertEqual(dataset.count(-1), 1000)
        self.assertTrue(np.all(dataset.labels[:1000] == 1))
        self.assertTrue(np.all(dataset.labels[1000:] == -1))

    def test_same_seed_is_bit_identical(self):
        first = generate_gaussians(2000, 2, 0.8, 42)
        second = generate_gaussians(2000, 2, 0.8, 42)
        self.assertEqual(first.features.tobytes(), second.features.tobytes())
        self.assertEqual(first, second)
        self.assertNotEqual(first, generate_gaussians(2000, 2, 0.8, 43))

    def test_small_sigma_approaches_class_centers(self):
        dataset = generate_gaussians(2, 1, 1e-12, 7)
        self.assertAlmostEqual(dataset.features[0, 0], 1.0, places=9)
        self.assertAlmostEqual(dataset.features[1, 0], -1.0, places=9)
        self.assertEqual(dataset.labels.tolist(), [1, -1])

    def test_class_means(self):
        dataset = generate_gaussians(4000, 3, 0.5, 1)
        self.assertTrue(np.allclose(dataset.features[dataset.labels == 1].mean(axis=0), 1.0, atol=0.05))
        self.assertTrue(np.allclose(dataset.features[dataset.labels == -1].mean(axis=0), -1.0, atol=0.05))

    def test_rejects_bad_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            generate_gaussians(1, 2, 0.8, 42)
        with self.assertRaises(InvalidArgumentError):
            generate_gaussians(7, 2, 0.8, 42)
        with self.assertRaises(InvalidArgumentError):
            generate_gaussians(10, 2, 0.0, 42)
        with self.assertRaises(InvalidArgumentError):
            generate_gaussians(10, 2, -1.0, 42)

    def test_imbalanced_counts(self):
        self.assertEqual(class_counts(4000, 0.2), (800, 3200))
        dataset = generate_gaussians(4000, 2, 0.8, 42, positive_fraction=0.2)
        self.assertEqual(dataset.count(1), 800)
        self.assertEqual(dataset.count(-1), 3200)
        # odd n is fine when the classes are not meant to be equal
        self.assertEqual(sum(class_counts(7, 0.25)), 7)


class TestDataset(unittest.TestCase):
    def test_rejects_invalid_labels(self):
        with self.assertRaises(InvalidArgumentError):
            Sample(features=(1.0,), label=0)
        with self.assertRaises(InvalidArgumentError):
            Dataset(features=np.zeros((2, 1)), labels=np.array([1, 0]))

    def test_rejects_mixed_dimensions_and_empty(self):
        with self.assertRaises(InvalidArgumentError):
            Dataset.from_samples([Sample((1.0,), 1), Sample((1.0, 2.0), -1)])
        with self.assertRaises(InvalidArgumentError):
            Dataset.from_samples([])

    def test_arrays_are_read_only(self):
        dataset = Dataset.from_samples([Sample((1.0, 2.0), 1), Sample((3.0, 4.0), -1)])
        with self.assertRaises(ValueError):
            dataset.features[0, 0] = 5.0
        self.assertEqual(dataset.samples[1], Sample((3.0, 4.0), -1))


class TestSplitValidation(unittest.TestCase):
    def setUp(self):
        self.dataset = generate_gaussians(2000, 2, 0.8, 42)

    def test_stratified_and_disjoint(self):
        training, validation = split_validation(self.dataset, 0.2, 42)
        self.assertEqual(len(training), 1600)
        self.assertEqual(len(validation), 400)
        self.assertEqual(validation.count(1), 200)
        self.assertEqual(validation.count(-1), 200)
        self.assertEqual(sample_multiset(training) + sample_multiset(validation), sample_multiset(self.dataset))

    def test_deterministic(self):
        first = split_validation(self.dataset, 0.2, 42)
        second = split_validation(self.dataset, 0.2, 42)
        self.assertEqual(first[0], second[0])
        self.assertEqual(first[1], second[1])


class TestPartitionDirichlet(unittest.TestCase):
    def setUp(self):
        self.dataset = generate_gaussians(2000, 2, 0.8, 42)

    def test_single_client_is_identity(self):
        (shard,) = partition_dirichlet(self.dataset, 1, 0.5, 3)
        self.assertEqual(shard, self.dataset)

    def test_shards_cover_dataset_with_both_labels(self):
        shards = partition_dirichlet(self.dataset, 5, 0.5, 7)
        self.assertEqual(len(shards), 5)
        self.assertEqual(sum(len(shard) for shard in shards), 2000)
        for shard in shards:
            self.assertGreater(shard.count(1), 0)
            self.assertGreater(shard.count(-1), 0)
        self.assertEqual(sample_multiset(concat_datasets(shards)), sample_multiset(self.dataset))

    def test_deterministic(self):
        first = partition_dirichlet(self.dataset, 5, 0.5, 7)
        second = partition_dirichlet(self.dataset, 5, 0.5, 7)
        for a, b in zip(first, second):
            self.assertEqual(a, b)

    def test_low_concentration_is_repaired(self):
        small = generate_gaussians(40, 2, 0.8, 1)
        shards = partition_dirichlet(small, 20, 0.01, 5)
        self.assertEqual(sum(len(shard) for shard in shards), 40)
        for shard in shards:
            self.assertEqual(shard.count(1), 1)
            self.assertEqual(shard.count(-1), 1)

    def test_too_many_clients(self):
        small = generate_gaussians(10, 2, 0.8, 1)
        with self.assertRaises(PartitionError):
            partition_dirichlet(small, 6, 0.5, 1)


class TestCsv(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        dataset = Dataset.from_samples(
            [Sample((0.1, 1e-300), 1), Sample((-2.5, 1.0 / 3.0), -1), Sample((123456.789, -0.0), 1)]
        )
        path = write_csv(dataset, self.dir / "data.csv")
        self.assertEqual(path.read_text().splitlines()[0], "f0,f1,label")
        self.assertEqual(read_csv(path), dataset)

    def test_generated_round_trip(self):
        dataset = generate_gaussians(200, 3, 0.8, 42)
        self.assertEqual(read_csv(write_csv(dataset, self.dir / "gen.csv")), dataset)

    def test_empty_file(self):
        path = self.dir / "empty.csv"
        path.write_text("")
        with self.assertRaisesRegex(DataFormatError, "no samples"):
            read_csv(path)

    def test_header_only(self):
        path = self.dir / "header.csv"
        path.write_text("f0,label\n")
        with self.assertRaisesRegex(DataFormatError, "no samples"):
            read_csv(path)

    def test_bad_label_names_line(self):
        path = self.dir / "bad.csv"
        path.write_text("f0,f1,label\n1.0,2.0,1\n3.0,4.0,0\n")
        with self.assertRaisesRegex(DataFormatError, "line 3"):
            read_csv(path)

    def test_non_numeric_value_names_line(self):
        path = self.dir / "text.csv"
        path.write_text("f0,label\nabc,1\n")
        with self.assertRaisesRegex(DataFormatError, "line 2"):
            read_csv(path)

    def test_missing_column(self):
        path = self.dir / "short.csv"
        path.write_text("f0,f1,label\n1.0,2.0,1\n3.0,-1\n")
        with self.assertRaises(DataFormatError):
            read_csv(path)

    def test_missing_file(self):
        with self.assertRaises(DataFormatError):
            read_csv(self.dir / "nope.csv")


if __name__ == "__main__":
    unittest.main()

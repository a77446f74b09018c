"""Synthetic datasets, non-IID client partitions and the dataset CSV format."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import DataFormatError, InvalidArgumentError, PartitionError
from .utils.logger import log, log_and_raise_error
from .utils.rng import stream

LABELS = (1, -1)
PARTITION_TRIES = 8


@dataclass(frozen=True)
class Sample:
    """One labeled feature vector."""

    features: Tuple[float, ...]
    label: int

    def __post_init__(self):
        if self.label not in LABELS:
            log_and_raise_error(f"Sample label must be -1 or +1, got {self.label}.", InvalidArgumentError)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered, nonempty set of samples sharing one dimension.

    Row ``i`` of ``features`` and entry ``i`` of ``labels`` form sample ``i``;
    indices are stable identifiers for distribution vectors.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0 or features.shape[1] == 0:
            log_and_raise_error(
                f"Dataset features must be a nonempty 2-D array, got shape {features.shape}.",
                InvalidArgumentError,
            )
        if labels.shape != (features.shape[0],):
            log_and_raise_error(
                f"Dataset has {features.shape[0]} feature rows but labels of shape {labels.shape}.",
                InvalidArgumentError,
            )
        if not np.all((labels == 1) | (labels == -1)):
            log_and_raise_error("Dataset labels must all be -1 or +1.", InvalidArgumentError)
        if not np.all(np.isfinite(features)):
            log_and_raise_error("Dataset features must be finite.", InvalidArgumentError)
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> Dataset:
        """Build a dataset from Sample objects."""
        if not samples:
            log_and_raise_error("Dataset needs at least one sample.", InvalidArgumentError)
        dimension = len(samples[0].features)
        if any(len(sample.features) != dimension for sample in samples):
            log_and_raise_error("All samples must share the same dimension.", InvalidArgumentError)
        return cls(
            features=np.array([sample.features for sample in samples], dtype=np.float64),
            labels=np.array([sample.label for sample in samples], dtype=np.int64),
        )

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    @property
    def samples(self) -> List[Sample]:
        return [
            Sample(features=tuple(float(v) for v in row), label=int(label))
            for row, label in zip(self.features, self.labels)
        ]

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.features, other.features) and np.array_equal(self.labels, other.labels)

    def count(self, label: int) -> int:
        """Number of samples carrying ``label``."""
        return int(np.count_nonzero(self.labels == label))

    def subset(self, indices: Sequence[int]) -> Dataset:
        """Samples at ``indices``, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(features=self.features[indices], labels=self.labels[indices])


def concat_datasets(datasets: Sequence[Dataset]) -> Dataset:
    """Concatenate datasets of equal dimension, keeping their order."""
    return Dataset(
        features=np.concatenate([d.features for d in datasets], axis=0),
        labels=np.concatenate([d.labels for d in datasets]),
    )


def class_counts(n: int, positive_fraction: float = 0.5) -> Tuple[int, int]:
    """
    Split a sample count into (positives, negatives).

    Args:
        n: total number of samples.
        positive_fraction: share of label +1, in (0, 1).

    Returns:
        The per-label counts; positives are n * positive_fraction rounded half up.

    Raises:
        InvalidArgumentError: Either class would be empty, or a balanced split of an odd n.
    """
    if not 0.0 < positive_fraction < 1.0:
        log_and_raise_error(f"positive_fraction must be in (0, 1), got {positive_fraction}.", InvalidArgumentError)
    if positive_fraction == 0.5 and n % 2:
        log_and_raise_error(f"A balanced dataset needs an even n, got {n}.", InvalidArgumentError)
    positives = int(math.floor(n * positive_fraction + 0.5))
    negatives = n - positives
    if positives < 1 or negatives < 1:
        log_and_raise_error(
            f"n={n} with positive_fraction={positive_fraction} leaves a class empty.", InvalidArgumentError
        )
    return positives, negatives


def split_counts(count: int, fraction: float) -> Tuple[int, int]:
    """Split one label's count into (training, validation) sizes."""
    held_out = int(math.floor(count * fraction + 0.5))
    return count - held_out, held_out


def generate_gaussians(
    n: int, dimension: int, sigma: float, seed: int, positive_fraction: float = 0.5
) -> Dataset:
    """
    Draw two spherical Gaussian classes centered at (+1, ..., +1) and (-1, ..., -1).

    All +1 samples come first, then all -1 samples. Draws come from the
    ``data`` stream: first the positive block, then the negative block.

    Args:
        n: number of samples, at least 2 (even when balanced).
        dimension: number of features.
        sigma: per-coordinate standard deviation.
        seed: experiment seed.
        positive_fraction: share of label +1.

    Returns:
        The generated Dataset.

    Raises:
        InvalidArgumentError: n < 2, odd n for a balanced set, non-positive sigma or dimension.
    """
    if n < 2:
        log_and_raise_error(f"n must be at least 2, got {n}.", InvalidArgumentError)
    if dimension < 1:
        log_and_raise_error(f"dimension must be positive, got {dimension}.", InvalidArgumentError)
    if not (sigma > 0.0 and math.isfinite(sigma)):
        log_and_raise_error(f"sigma must be a positive finite number, got {sigma}.", InvalidArgumentError)
    positives, negatives = class_counts(n, positive_fraction)

    rng = stream(seed, "data")
    positive_block = rng.normal(loc=1.0, scale=sigma, size=(positives, dimension))
    negative_block = rng.normal(loc=-1.0, scale=sigma, size=(negatives, dimension))
    return Dataset(
        features=np.concatenate([positive_block, negative_block], axis=0),
        labels=np.concatenate([np.ones(positives, dtype=np.int64), -np.ones(negatives, dtype=np.int64)]),
    )


def split_validation(dataset: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Hold out a stratified validation split for the server.

    For each label (+1 then -1) the label's indices are permuted with the
    ``split`` stream and the first ``round(count * fraction)`` are held out.
    Both parts keep the original sample order.

    Args:
        dataset: the full generated dataset.
        fraction: share of each label held out, in (0, 1).
        seed: experiment seed.

    Returns:
        (training, validation) datasets.

    Raises:
        InvalidArgumentError: fraction outside (0, 1) or a part would be empty.
    """
    if not 0.0 < fraction < 1.0:
        log_and_raise_error(f"Validation fraction must be in (0, 1), got {fraction}.", InvalidArgumentError)
    rng = stream(seed, "split")
    held_out = []
    for label in LABELS:
        indices = np.flatnonzero(dataset.labels == label)
        _, n_validation = split_counts(len(indices), fraction)
        held_out.append(rng.permutation(indices)[:n_validation])
    validation_mask = np.zeros(len(dataset), dtype=bool)
    validation_mask[np.concatenate(held_out)] = True
    if validation_mask.all() or not validation_mask.any():
        log_and_raise_error(
            f"Validation fraction {fraction} leaves the training or validation split empty.", InvalidArgumentError
        )
    return dataset.subset(np.flatnonzero(~validation_mask)), dataset.subset(np.flatnonzero(validation_mask))


def _dirichlet_assignment(
    labels: np.ndarray, clients: int, concentration: float, rng: np.random.Generator
) -> np.ndarray:
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    for label in LABELS:
        indices = rng.permutation(np.flatnonzero(labels == label))
        proportions = rng.dirichlet(np.full(clients, concentration))
        if not np.all(np.isfinite(proportions)):
            proportions = np.full(clients, 1.0 / clients)
        cuts = (np.cumsum(proportions) * len(indices)).astype(np.int64)[:-1]
        for client, part in enumerate(np.split(indices, cuts)):
            assignment[part] = client
    return assignment


def _label_counts(assignment: np.ndarray, labels: np.ndarray, clients: int) -> np.ndarray:
    return np.array(
        [[np.count_nonzero((assignment == c) & (labels == label)) for label in LABELS] for c in range(clients)]
    )


def _repair_assignment(assignment: np.ndarray, labels: np.ndarray, clients: int) -> np.ndarray:
    """Give every shard one sample of each label, taking from the largest shard that can spare one."""
    assignment = assignment.copy()
    counts = _label_counts(assignment, labels, clients)
    for client in range(clients):
        for column, label in enumerate(LABELS):
            while counts[client, column] == 0:
                donors = [c for c in range(clients) if counts[c, column] >= 2]
                if not donors:
                    log_and_raise_error(
                        f"Cannot give client {client} a sample of label {label}.", PartitionError
                    )
                donor = max(donors, key=lambda c: (counts[c].sum(), -c))
                moved = np.flatnonzero((assignment == donor) & (labels == label))[-1]
                assignment[moved] = client
                counts[donor, column] -= 1
                counts[client, column] += 1
    return assignment


def partition_dirichlet(dataset: Dataset, clients: int, concentration: float, seed: int) -> List[Dataset]:
    """
    Split a dataset into label-skewed client shards.

    For each label the per-client proportions are drawn from
    Dirichlet(concentration, ..., concentration). A split leaving some shard
    without both labels is redrawn up to PARTITION_TRIES times; after that,
    samples are moved greedily from the largest shards. Each shard keeps the
    input's sample order.

    Args:
        dataset: the training data; must contain both labels.
        clients: number of shards k.
        concentration: Dirichlet concentration; smaller is more skewed.
        seed: experiment seed (``partition`` stream).

    Returns:
        k datasets whose union is the input.

    Raises:
        PartitionError: k exceeds a label's count, or repair is impossible.
        InvalidArgumentError: k < 1 or non-positive concentration.
    """
    if clients < 1:
        log_and_raise_error(f"Number of clients must be positive, got {clients}.", InvalidArgumentError)
    if not concentration > 0.0:
        log_and_raise_error(f"Concentration must be positive, got {concentration}.", InvalidArgumentError)
    smallest_class = min(dataset.count(label) for label in LABELS)
    if smallest_class == 0:
        log_and_raise_error("Dataset must contain both labels to be partitioned.", PartitionError)
    if clients > smallest_class:
        log_and_raise_error(
            f"Cannot give {clients} clients both labels: the smallest class has {smallest_class} samples.",
            PartitionError,
        )
    if clients == 1:
        return [dataset]

    rng = stream(seed, "partition")
    for _ in range(PARTITION_TRIES):
        assignment = _dirichlet_assignment(dataset.labels, clients, concentration, rng)
        if _label_counts(assignment, dataset.labels, clients).min() > 0:
            break
    else:
        log(f"Dirichlet split left a shard incomplete after {PARTITION_TRIES} tries, repairing.", clients=clients)
        assignment = _repair_assignment(assignment, dataset.labels, clients)
    return [dataset.subset(np.flatnonzero(assignment == client)) for client in range(clients)]


def _csv_columns(dimension: int) -> List[str]:
    return [f"f{j}" for j in range(dimension)] + ["label"]


def write_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    """
    Write a dataset as ``f0,...,f{d-1},label`` with 17 significant digits.

    Args:
        dataset: the dataset to write.
        path: destination file.

    Returns:
        The written path.

    Raises:
        DataFormatError: The file could not be written.
    """
    path = Path(path)
    frame = pd.DataFrame(dataset.features, columns=_csv_columns(dataset.dimension)[:-1])
    frame["label"] = dataset.labels
    try:
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        log_and_raise_error(f"Could not write dataset to {path}. Error: {e}.", DataFormatError)
    return path


def _parse_cell(cell: object, path: Path, line: int, column: str) -> float:
    if not isinstance(cell, str) or not cell.strip():
        log_and_raise_error(f"{path}, line {line}: missing value for {column}.", DataFormatError)
    try:
        value = float(cell)
    except ValueError:
        log_and_raise_error(f"{path}, line {line}: {column} is not a number: {cell!r}.", DataFormatError)
    if not math.isfinite(value):
        log_and_raise_error(f"{path}, line {line}: {column} is not finite: {cell!r}.", DataFormatError)
    return value


def read_csv(path: Union[str, Path]) -> Dataset:
    """
    Read a dataset written by write_csv.

    Args:
        path: CSV file with header ``f0,...,f{d-1},label``.

    Returns:
        The parsed Dataset.

    Raises:
        DataFormatError: Missing file, no samples, bad header, malformed row or
            a label outside {-1, +1}; row errors name the line number.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        log_and_raise_error(f"{path}: no samples.", DataFormatError)
    except pd.errors.ParserError as e:
        log_and_raise_error(f"{path}: malformed row. Error: {e}", DataFormatError)
    except OSError as e:
        log_and_raise_error(f"Could not read dataset from {path}. Error: {e}.", DataFormatError)

    columns = list(frame.columns)
    if len(columns) < 2 or columns != _csv_columns(len(columns) - 1):
        log_and_raise_error(f"{path}, line 1: header must be f0,...,f{{d-1}},label, got {columns}.", DataFormatError)
    if frame.empty:
        log_and_raise_error(f"{path}: no samples.", DataFormatError)

    features = []
    labels = []
    for line, row in enumerate(frame.itertuples(index=False, name=None), start=2):
        values = [_parse_cell(cell, path, line, column) for cell, column in zip(row, columns)]
        label = values.pop()
        if label not in (1.0, -1.0):
            log_and_raise_error(f"{path}, line {line}: label must be -1 or +1, got {row[-1]!r}.", DataFormatError)
        features.append(values)
        labels.append(int(label))
    return Dataset(features=np.array(features, dtype=np.float64), labels=np.array(labels, dtype=np.int64))

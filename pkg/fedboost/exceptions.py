"""Exceptions raised by fedboost."""


class FedBoostError(ValueError):
    """Base error. Unhandled at the CLI it maps to a runtime failure."""

    exit_code = 2


class ConfigError(FedBoostError):
    """Config file missing, malformed or violating a constraint."""

    exit_code = 1


class InvalidArgumentError(FedBoostError):
    """An operation was called outside its preconditions."""


class DimensionError(InvalidArgumentError):
    """Feature vector length does not match what the model expects."""


class DataFormatError(FedBoostError):
    """A dataset file could not be parsed."""


class PartitionError(FedBoostError):
    """A dataset could not be split into valid client shards."""


class NumericError(FedBoostError):
    """A distribution update produced a zero or non-finite normalizer."""


class NonConvergenceError(FedBoostError):
    """A run was required to converge and did not."""

    exit_code = 3
